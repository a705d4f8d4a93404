#include "vista/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <vector>

#include "vista/error.hpp"

namespace vista {
namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string where(std::string_view source, std::size_t line) {
  return std::string(source) + ":" + std::to_string(line) + ": ";
}

template <typename T>
T parse_integer(std::string_view key, std::string_view value, const std::string& loc) {
  T out{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw Error(ErrorCode::kParse, loc + "key '" + std::string(key) +
                                       "' expects an integer, got '" +
                                       std::string(value) + "'");
  }
  return out;
}

double parse_real(std::string_view key, std::string_view value, const std::string& loc) {
  // from_chars for double is not available in every libstdc++ we target.
  std::string s(value);
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty() || !std::isfinite(out)) {
    throw Error(ErrorCode::kParse, loc + "key '" + std::string(key) +
                                       "' expects a finite number, got '" + s + "'");
  }
  return out;
}

std::size_t parse_count(std::string_view key, std::string_view value,
                        const std::string& loc, bool allow_zero) {
  const auto v = parse_integer<long long>(key, value, loc);
  if (v < (allow_zero ? 0 : 1)) {
    throw Error(ErrorCode::kInvalidArgument,
                loc + "key '" + std::string(key) + "' must be " +
                    (allow_zero ? ">= 0" : ">= 1") + ", got " + std::string(value));
  }
  return static_cast<std::size_t>(v);
}

std::string format_real(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& msg) {
    throw Error(ErrorCode::kInvalidArgument, "config: " + msg);
  };
  if (image_size == 0 || classes == 0 || scales == 0 || batch_size == 0 ||
      steps_per_epoch == 0 || eval_samples == 0 || timing_reps == 0) {
    fail("counts must be positive");
  }
  if (classes < 2) fail("classes must be >= 2");
  if (scales > 4) fail("scales must be <= 4");
  const std::size_t step = std::size_t{1} << (scales - 1);
  if (image_size % step != 0 || image_size % 4 != 0) {
    fail("image_size must be a multiple of 4 and of 2^(scales-1)");
  }
  if (rank < 0) fail("rank must be >= 0");
  if (iterations < 1) fail("iterations must be >= 1");
  if (!(learning_rate >= 0.0)) fail("learning_rate must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) fail("momentum must be in [0, 1)");
  if (!(noise >= 0.0)) fail("noise must be >= 0");
  model().inference.validate();
}

ModelConfig ExperimentConfig::model() const {
  ModelConfig m;
  m.task = task;
  m.in_channels = 3;
  m.stage_channels.assign(scales, 16);
  m.stage_channels[0] = 8;
  m.classes = classes;
  m.inference.rank = rank;
  m.inference.iterations = iterations;
  m.inference.variant = variant;
  return m;
}

OptimizerConfig ExperimentConfig::optimizer_config() const {
  OptimizerConfig o;
  o.kind = optimizer;
  o.learning_rate = learning_rate;
  o.momentum = momentum;
  o.beta1 = momentum > 0.0 ? momentum : o.beta1;
  o.clip_norm = 5.0;
  return o;
}

ExperimentConfig parse_config_text(std::string_view text, std::string_view source) {
  ExperimentConfig cfg;
  bool have_task = false, have_seed = false;
  std::map<std::string, std::size_t, std::less<>> seen;

  using Setter = std::function<void(std::string_view, const std::string&)>;
  const std::map<std::string, Setter, std::less<>> setters = {
      {"task", [&](std::string_view v, const std::string& loc) {
         try {
           cfg.task = parse_task(v);
         } catch (const Error& e) {
           throw Error(ErrorCode::kParse, loc + e.what());
         }
         have_task = true;
       }},
      {"seed", [&](std::string_view v, const std::string& loc) {
         cfg.seed = parse_integer<std::uint64_t>("seed", v, loc);
         have_seed = true;
       }},
      {"image_size", [&](std::string_view v, const std::string& loc) {
         cfg.image_size = parse_count("image_size", v, loc, false);
       }},
      {"classes", [&](std::string_view v, const std::string& loc) {
         cfg.classes = parse_count("classes", v, loc, false);
       }},
      {"scales", [&](std::string_view v, const std::string& loc) {
         cfg.scales = parse_count("scales", v, loc, false);
       }},
      {"rank", [&](std::string_view v, const std::string& loc) {
         cfg.rank = static_cast<int>(parse_count("rank", v, loc, true));
       }},
      {"variant", [&](std::string_view v, const std::string& loc) {
         try {
           cfg.variant = parse_variant(v);
         } catch (const Error& e) {
           throw Error(ErrorCode::kParse, loc + e.what());
         }
       }},
      {"iterations", [&](std::string_view v, const std::string& loc) {
         cfg.iterations = static_cast<int>(parse_count("iterations", v, loc, false));
       }},
      {"optimizer", [&](std::string_view v, const std::string& loc) {
         try {
           cfg.optimizer = parse_optimizer(v);
         } catch (const Error& e) {
           throw Error(ErrorCode::kParse, loc + e.what());
         }
       }},
      {"learning_rate", [&](std::string_view v, const std::string& loc) {
         cfg.learning_rate = parse_real("learning_rate", v, loc);
         if (cfg.learning_rate < 0.0) {
           throw Error(ErrorCode::kInvalidArgument,
                       loc + "key 'learning_rate' must be >= 0");
         }
       }},
      {"momentum", [&](std::string_view v, const std::string& loc) {
         cfg.momentum = parse_real("momentum", v, loc);
         if (cfg.momentum < 0.0 || cfg.momentum >= 1.0) {
           throw Error(ErrorCode::kInvalidArgument,
                       loc + "key 'momentum' must be in [0, 1)");
         }
       }},
      {"epochs", [&](std::string_view v, const std::string& loc) {
         cfg.epochs = parse_count("epochs", v, loc, true);
       }},
      {"steps_per_epoch", [&](std::string_view v, const std::string& loc) {
         cfg.steps_per_epoch = parse_count("steps_per_epoch", v, loc, false);
       }},
      {"batch_size", [&](std::string_view v, const std::string& loc) {
         cfg.batch_size = parse_count("batch_size", v, loc, false);
       }},
      {"eval_samples", [&](std::string_view v, const std::string& loc) {
         cfg.eval_samples = parse_count("eval_samples", v, loc, false);
       }},
      {"noise", [&](std::string_view v, const std::string& loc) {
         cfg.noise = parse_real("noise", v, loc);
         if (cfg.noise < 0.0) {
           throw Error(ErrorCode::kInvalidArgument, loc + "key 'noise' must be >= 0");
         }
       }},
      {"timing_reps", [&](std::string_view v, const std::string& loc) {
         cfg.timing_reps = parse_count("timing_reps", v, loc, false);
       }},
      {"output_dir", [&](std::string_view v, const std::string& loc) {
         if (v.empty()) {
           throw Error(ErrorCode::kParse, loc + "key 'output_dir' is empty");
         }
         cfg.output_dir = std::string(v);
       }},
  };

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line =
        text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (line_no == 1 && line.substr(0, 3) == "\xEF\xBB\xBF") line.remove_prefix(3);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;

    const std::string loc = where(source, line_no);
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::kParse,
                  loc + "expected 'key = value', got '" + std::string(line) + "'");
    }
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    const auto it = setters.find(key);
    if (it == setters.end()) {
      throw Error(ErrorCode::kParse, loc + "unknown key '" + std::string(key) + "'");
    }
    if (const auto prev = seen.find(key); prev != seen.end()) {
      throw Error(ErrorCode::kParse, loc + "duplicate key '" + std::string(key) +
                                         "' (first set on line " +
                                         std::to_string(prev->second) + ")");
    }
    seen.emplace(std::string(key), line_no);
    it->second(value, loc);
  }

  if (!have_task) {
    throw Error(ErrorCode::kParse, std::string(source) + ": missing required key 'task'");
  }
  if (!have_seed) {
    throw Error(ErrorCode::kParse, std::string(source) + ": missing required key 'seed'");
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::kIo, "cannot open config '" + path.string() + "'");
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path.string());
}

namespace {

std::string body_text(const ExperimentConfig& c) {
  std::ostringstream os;
  os << "task = " << to_string(c.task) << "\n"
     << "seed = " << c.seed << "\n"
     << "image_size = " << c.image_size << "\n"
     << "classes = " << c.classes << "\n"
     << "scales = " << c.scales << "\n"
     << "rank = " << c.rank << "\n"
     << "variant = " << to_string(c.variant) << "\n"
     << "iterations = " << c.iterations << "\n"
     << "optimizer = " << to_string(c.optimizer) << "\n"
     << "learning_rate = " << format_real(c.learning_rate) << "\n"
     << "momentum = " << format_real(c.momentum) << "\n"
     << "epochs = " << c.epochs << "\n"
     << "steps_per_epoch = " << c.steps_per_epoch << "\n"
     << "batch_size = " << c.batch_size << "\n"
     << "eval_samples = " << c.eval_samples << "\n"
     << "noise = " << format_real(c.noise) << "\n"
     << "timing_reps = " << c.timing_reps << "\n";
  return os.str();
}

}  // namespace

std::string serialize_config(const ExperimentConfig& cfg) {
  return body_text(cfg) + "output_dir = " + cfg.output_dir + "\n";
}

std::string config_hash(const ExperimentConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : body_text(cfg)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = digits[h & 15];
  return out;
}

}  // namespace vista
