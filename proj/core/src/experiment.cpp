#include "vista/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "vista/checkpoint.hpp"
#include "vista/error.hpp"
#include "vista/frontend.hpp"
#include "vista/random.hpp"
#include "vista/svg_plot.hpp"

namespace vista {
namespace {

// glibc moves its mmap threshold after the first large free, so whether a
// 128 KiB activation is mmapped depends on heap history. Fixing the
// thresholds keeps forward timings comparable across runs in one process.
void pin_allocator_thresholds() {
#if defined(__GLIBC__)
  static std::once_flag once;
  std::call_once(once, [] {
    mallopt(M_MMAP_THRESHOLD, 32 << 20);
    mallopt(M_TRIM_THRESHOLD, 256 << 20);
  });
#endif
}

// Seed stream tags.
constexpr std::uint64_t kInitTag = 0x696e6974;
constexpr std::uint64_t kTrainTag = 0x747261696e;
constexpr std::uint64_t kEvalTag = 0x6576616c;
constexpr std::uint64_t kGuessTag = 0x6775657373;

constexpr std::size_t kCsvColumns = 16;

std::string real_text(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

double parse_real_field(const std::string& s, std::string_view column) {
  if (s.empty()) {
    throw Error(ErrorCode::kParse, "csv: empty value in column " + std::string(column));
  }
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) {
    throw Error(ErrorCode::kParse,
                "csv: bad number '" + s + "' in column " + std::string(column));
  }
  return v;
}

std::uint64_t parse_uint_field(const std::string& s, std::string_view column) {
  char* end = nullptr;
  const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size() || s[0] == '-') {
    throw Error(ErrorCode::kParse,
                "csv: bad integer '" + s + "' in column " + std::string(column));
  }
  return v;
}

std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const auto next = text.find(sep, pos);
    out.emplace_back(text.substr(pos, next == std::string_view::npos ? next : next - pos));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

std::string sanitize(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write '" + path.string() + "'");
  out << text;
}

TaskOptions task_options(const ExperimentConfig& cfg) {
  TaskOptions o;
  o.classes = cfg.classes;
  o.in_channels = 3;
  o.noise = cfg.noise;
  return o;
}

double final_loss(const RunRecord& r) {
  return r.epoch_losses.empty() ? std::numeric_limits<double>::quiet_NaN()
                                : r.epoch_losses.back();
}

}  // namespace

std::string csv_header() {
  return "config_hash,task,variant,rank,seed,epochs,parameter_count,flops,"
         "diverged,final_loss,epoch_losses,metrics,warnings,note,forward_ms,"
         "timestamp";
}

std::string to_csv_row(const RunRecord& r) {
  std::string losses, metrics;
  for (double l : r.epoch_losses) losses += (losses.empty() ? "" : ";") + real_text(l);
  for (const auto& [k, v] : r.metrics.values) {
    metrics += (metrics.empty() ? "" : ";") + k + "=" + real_text(v);
  }
  std::ostringstream os;
  os << r.config_hash << ',' << to_string(r.task) << ',' << to_string(r.variant) << ','
     << r.rank << ',' << r.seed << ',' << r.epoch_losses.size() << ','
     << r.parameter_count << ',' << r.flops << ',' << (r.diverged ? 1 : 0) << ','
     << real_text(final_loss(r)) << ',' << losses << ',' << metrics << ','
     << r.metrics.warnings << ',' << sanitize(r.note) << ',' << real_text(r.forward_ms)
     << ',' << r.timestamp;
  return os.str();
}

RunRecord parse_csv_row(std::string_view row) {
  while (!row.empty() && (row.back() == '\n' || row.back() == '\r')) row.remove_suffix(1);
  const auto f = split(row, ',');
  if (f.size() != kCsvColumns) {
    throw Error(ErrorCode::kParse, "csv: expected " + std::to_string(kCsvColumns) +
                                       " columns, got " + std::to_string(f.size()));
  }
  RunRecord r;
  r.config_hash = f[0];
  r.task = parse_task(f[1]);
  r.variant = parse_variant(f[2]);
  r.rank = static_cast<int>(parse_uint_field(f[3], "rank"));
  r.seed = parse_uint_field(f[4], "seed");
  const auto epochs = parse_uint_field(f[5], "epochs");
  r.parameter_count = parse_uint_field(f[6], "parameter_count");
  r.flops = parse_uint_field(f[7], "flops");
  r.diverged = parse_uint_field(f[8], "diverged") != 0;
  if (!f[10].empty()) {
    for (const auto& s : split(f[10], ';')) {
      r.epoch_losses.push_back(parse_real_field(s, "epoch_losses"));
    }
  }
  if (r.epoch_losses.size() != epochs) {
    throw Error(ErrorCode::kParse, "csv: epochs column disagrees with epoch_losses");
  }
  if (!f[11].empty()) {
    for (const auto& kv : split(f[11], ';')) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) {
        throw Error(ErrorCode::kParse, "csv: bad metric entry '" + kv + "'");
      }
      r.metrics.values.emplace_back(kv.substr(0, eq),
                                    parse_real_field(kv.substr(eq + 1), "metrics"));
    }
  }
  r.metrics.warnings = parse_uint_field(f[12], "warnings");
  r.note = f[13];
  r.forward_ms = parse_real_field(f[14], "forward_ms");
  r.timestamp = f[15];
  return r;
}

std::string deterministic_part(std::string_view row) {
  std::size_t cut = row.size();
  for (int i = 0; i < 2; ++i) {
    cut = row.rfind(',', cut == 0 ? 0 : cut - 1);
    if (cut == std::string_view::npos) return std::string(row);
  }
  return std::string(row.substr(0, cut));
}

std::filesystem::path output_root(const ExperimentConfig& cfg) {
  if (const char* env = std::getenv(kOutputRootEnv); env != nullptr && *env != '\0') {
    return env;
  }
  return cfg.output_dir;
}

std::string run_name(const ExperimentConfig& cfg) {
  return std::string(to_string(cfg.task)) + "_" + std::string(to_string(cfg.variant)) +
         "_T" + std::to_string(cfg.rank) + "_s" + std::to_string(cfg.seed) + "_" +
         config_hash(cfg).substr(0, 8);
}

std::vector<SyntheticSample> eval_split(const ExperimentConfig& cfg) {
  std::vector<SyntheticSample> out;
  for (std::size_t i = 0; i < cfg.eval_samples; ++i) {
    out.push_back(gen_task(cfg.task, cfg.image_size, cfg.image_size,
                           derive_seed(cfg.seed, {kEvalTag, i}), task_options(cfg)));
  }
  return out;
}

MetricReport evaluate(const ParamSet& params, const ExperimentConfig& cfg,
                      const std::vector<SyntheticSample>& samples) {
  const ModelConfig mc = cfg.model();
  MetricAccumulator acc(cfg.task, cfg.classes);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    const Tensor pred =
        predict(params, mc, s.image, derive_seed(cfg.seed, {kGuessTag, kEvalTag, i}));
    switch (cfg.task) {
      case TaskKind::kDepth: acc.add_depth(pred, s.target, s.valid_mask); break;
      case TaskKind::kSegmentation: acc.add_seg(argmax_labels(pred), s.labels); break;
      case TaskKind::kNormals: acc.add_normals(pred, s.target, s.valid_mask); break;
    }
  }
  return acc.report();
}

namespace {

RunRecord run_in(const ExperimentConfig& cfg, const std::filesystem::path& dir) {
  cfg.validate();
  const ModelConfig mc = cfg.model();
  const std::size_t n = cfg.image_size;

  RunRecord r;
  r.config_hash = config_hash(cfg);
  r.task = cfg.task;
  r.variant = cfg.variant;
  r.rank = cfg.rank;
  r.seed = cfg.seed;
  r.flops = model_flops(mc, n, n);

  ParamSet params = init_model(mc, n, n, derive_seed(cfg.seed, {kInitTag}));
  r.parameter_count = params.parameter_count();
  OptimizerState state;
  const OptimizerConfig opt = cfg.optimizer_config();
  const TaskOptions topt = task_options(cfg);

  try {
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
      double total = 0.0;
      for (std::size_t step = 0; step < cfg.steps_per_epoch; ++step) {
        const std::uint64_t global = epoch * cfg.steps_per_epoch + step;
        std::vector<SyntheticSample> batch;
        for (std::size_t i = 0; i < cfg.batch_size; ++i) {
          batch.push_back(gen_task(cfg.task, n, n,
                                   derive_seed(cfg.seed, {kTrainTag, global, i}), topt));
        }
        total += train_step(params, state, batch, mc, opt,
                            derive_seed(cfg.seed, {kGuessTag, kTrainTag}),
                            static_cast<std::int64_t>(global));
      }
      r.epoch_losses.push_back(total / static_cast<double>(cfg.steps_per_epoch));
    }
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kDiverged) throw;
    r.diverged = true;
    r.note = e.what();
  }

  const auto samples = eval_split(cfg);
  if (!r.diverged) r.metrics = evaluate(params, cfg, samples);

  pin_allocator_thresholds();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < cfg.timing_reps; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    const Tensor out = predict(params, mc, samples[0].image, cfg.seed);
    const auto t1 = std::chrono::steady_clock::now();
    if (out.empty()) break;
    best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  r.forward_ms = best;
  r.timestamp = utc_timestamp();

  std::filesystem::create_directories(dir);
  write_text(dir / "config.txt", serialize_config(cfg));
  write_text(dir / "record.csv", csv_header() + "\n" + to_csv_row(r) + "\n");
  save_checkpoint(params, dir / "checkpoint.bin");
  return r;
}

}  // namespace

RunRecord run_experiment(const ExperimentConfig& cfg) {
  return run_in(cfg, output_root(cfg) / run_name(cfg));
}

std::string_view to_string(AblationAxis axis) {
  return axis == AblationAxis::kRank ? "rank" : "variant";
}

AblationAxis parse_axis(std::string_view text) {
  if (text == "variant") return AblationAxis::kVariant;
  if (text == "rank") return AblationAxis::kRank;
  throw Error(ErrorCode::kParse,
              "unknown ablation axis '" + std::string(text) + "' (expected variant or rank)");
}

std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  for (auto& item : split(text, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) {
      throw Error(ErrorCode::kParse, "empty entry in list '" + std::string(text) + "'");
    }
    out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

AblationResult run_ablation(const ExperimentConfig& base, AblationAxis axis,
                            const std::vector<std::string>& values, std::size_t jobs) {
  if (values.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "ablation needs at least one value");
  }
  std::vector<ExperimentConfig> cfgs;
  for (const auto& v : values) {
    ExperimentConfig c = base;
    if (axis == AblationAxis::kVariant) {
      c.variant = parse_variant(v);
    } else {
      char* end = nullptr;
      const long r = std::strtol(v.c_str(), &end, 10);
      if (v.empty() || end != v.c_str() + v.size() || r < 0 || r > 64) {
        throw Error(ErrorCode::kInvalidArgument,
                    "rank value '" + v + "' must be an integer in [0, 64]");
      }
      c.rank = static_cast<int>(r);
    }
    c.validate();
    cfgs.push_back(std::move(c));
  }

  AblationResult res;
  res.axis = axis;
  res.values = values;
  res.records.resize(cfgs.size());
  const std::filesystem::path root =
      output_root(base) / ("ablation_" + std::string(to_string(axis)));

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cfgs.size(); i = next++) {
      const auto dir = root / (std::to_string(i) + "_" + values[i]);
      try {
        res.records[i] = run_in(cfgs[i], dir);
      } catch (const std::exception& e) {
        RunRecord r;
        r.config_hash = config_hash(cfgs[i]);
        r.task = cfgs[i].task;
        r.variant = cfgs[i].variant;
        r.rank = cfgs[i].rank;
        r.seed = cfgs[i].seed;
        r.diverged = true;
        r.note = e.what();
        r.timestamp = utc_timestamp();
        res.records[i] = std::move(r);
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(jobs, 1, cfgs.size());
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  std::filesystem::create_directories(root);
  std::ostringstream csv, dat;
  csv << "axis,value," << csv_header() << "\n";
  const auto metric_cols = metric_names(base.task);
  dat << "# x " << to_string(axis) << " parameter_count flops forward_ms final_loss";
  for (const auto& m : metric_cols) dat << ' ' << m;
  dat << "\n";

  std::vector<PlotSeries> series;
  series.push_back({"parameter_count", {}});
  series.push_back({"forward_ms", {}});
  for (const auto& m : metric_cols) series.push_back({m, {}});

  for (std::size_t i = 0; i < cfgs.size(); ++i) {
    const RunRecord& r = res.records[i];
    csv << to_string(axis) << ',' << values[i] << ',' << to_csv_row(r) << "\n";
    const double x = axis == AblationAxis::kRank ? cfgs[i].rank : static_cast<double>(i);
    dat << real_text(x) << ' ' << values[i] << ' ' << r.parameter_count << ' ' << r.flops
        << ' ' << real_text(r.forward_ms) << ' ' << real_text(final_loss(r));
    series[0].y.push_back(static_cast<double>(r.parameter_count));
    series[1].y.push_back(r.forward_ms);
    for (std::size_t m = 0; m < metric_cols.size(); ++m) {
      const double v = r.metrics.contains(metric_cols[m])
                           ? r.metrics.at(metric_cols[m])
                           : std::numeric_limits<double>::quiet_NaN();
      dat << ' ' << real_text(v);
      series[m + 2].y.push_back(v);
    }
    dat << "\n";
  }
  res.csv_path = root / "comparison.csv";
  res.dat_path = root / "plot.dat";
  res.svg_path = root / "plot.svg";
  write_text(res.csv_path, csv.str());
  write_text(res.dat_path, dat.str());
  write_text(res.svg_path,
             render_svg(std::string(to_string(base.task)) + " ablation over " +
                            std::string(to_string(axis)),
                        values, series));
  return res;
}

}  // namespace vista
