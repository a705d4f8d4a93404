#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "vista/checkpoint.hpp"
#include "vista/checks.hpp"
#include "vista/config.hpp"
#include "vista/error.hpp"
#include "vista/experiment.hpp"
#include "vista/random.hpp"

using namespace vista;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("vista_unit_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

ExperimentConfig tiny(const fs::path& out) {
  ExperimentConfig c = parse_config_text("task = segmentation\nseed = 3\n");
  c.image_size = 16;
  c.epochs = 2;
  c.steps_per_epoch = 2;
  c.batch_size = 1;
  c.eval_samples = 2;
  c.timing_reps = 1;
  c.output_dir = out.string();
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::kIo;
}

}  // namespace

TEST(Config, DefaultsAndRequiredKeys) {
  const auto c = parse_config_text("# comment\ntask = depth\nseed = 7  # trailing\n");
  EXPECT_EQ(c.task, TaskKind::kDepth);
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.image_size, 32u);
  EXPECT_EQ(c.rank, 1);
  EXPECT_EQ(c.epochs * c.steps_per_epoch, 200u);
  EXPECT_EQ(code_of([] { parse_config_text("seed = 1\n"); }), ErrorCode::kParse);
}

TEST(Config, NegativeRankNamesKey) {
  try {
    parse_config_text("task = segmentation\nseed = 1\nrank = -1\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("rank"), std::string::npos);
  }
}

TEST(Config, UnknownKeyReportsLine) {
  try {
    parse_config_text("task = depth\nseed = 1\n\ncolour = red\n", "exp.cfg");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParse);
    EXPECT_NE(std::string(e.what()).find("exp.cfg:4"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("colour"), std::string::npos);
  }
  EXPECT_THROW(parse_config_text("task = depth\nseed = 1\nseed = 2\n"), Error);
  EXPECT_THROW(parse_config_text("task = depth\nseed = 1\nrank 3\n"), Error);
  EXPECT_THROW(parse_config_text("task = depth\nseed = 1\nimage_size = 30\n"), Error);
}

TEST(Config, SerializeRoundTrip) {
  ExperimentConfig c = parse_config_text("task = normals\nseed = 11\n");
  c.rank = 5;
  c.variant = AttentionVariant::kChannelOnly;
  c.learning_rate = 0.012345678901234567;
  c.optimizer = OptimizerKind::kAdam;
  const auto back = parse_config_text(serialize_config(c));
  EXPECT_EQ(back, c);
  EXPECT_EQ(config_hash(back), config_hash(c));
  ExperimentConfig moved = c;
  moved.output_dir = "elsewhere";
  EXPECT_EQ(config_hash(moved), config_hash(c));
  moved.rank = 6;
  EXPECT_NE(config_hash(moved), config_hash(c));
}

TEST(Config, FileErrors) {
  EXPECT_EQ(code_of([] { parse_config("/nonexistent/vista.cfg"); }), ErrorCode::kIo);
}

TEST(Csv, RoundTrip) {
  RunRecord r;
  r.config_hash = "0123456789abcdef";
  r.rank = 3;
  r.seed = 99;
  r.epoch_losses = {1.5, 0.1234567890123456789, 1e-300};
  r.metrics.values = {{"pix_acc", 0.75}, {"miou", 7.0 / 12.0}};
  r.metrics.warnings = 2;
  r.parameter_count = 1234;
  r.flops = 987654321;
  r.note = "stopped at step 4";
  r.forward_ms = 0.5;
  r.timestamp = "2024-01-01T00:00:00Z";
  const std::string row = to_csv_row(r);
  const RunRecord back = parse_csv_row(row);
  EXPECT_EQ(back.config_hash, r.config_hash);
  EXPECT_EQ(back.task, r.task);
  EXPECT_EQ(back.rank, r.rank);
  EXPECT_EQ(back.seed, r.seed);
  EXPECT_EQ(back.epoch_losses, r.epoch_losses);
  EXPECT_EQ(back.metrics.values, r.metrics.values);
  EXPECT_EQ(back.metrics.warnings, r.metrics.warnings);
  EXPECT_EQ(back.note, r.note);
  EXPECT_EQ(back.forward_ms, r.forward_ms);
  EXPECT_EQ(back.timestamp, r.timestamp);
  EXPECT_EQ(back, r) << row;
  // notes are free text; separators are flattened to keep one row per run
  r.note = "a,b\nc";
  EXPECT_EQ(parse_csv_row(to_csv_row(r)).note.find(','), std::string::npos);
  EXPECT_EQ(code_of([] { parse_csv_row("a,b,c"); }), ErrorCode::kParse);
}

TEST(Csv, DeterministicPartDropsTiming) {
  RunRecord a;
  a.config_hash = "x";
  RunRecord b = a;
  b.forward_ms = 3.0;
  b.timestamp = "later";
  EXPECT_NE(to_csv_row(a), to_csv_row(b));
  EXPECT_EQ(deterministic_part(to_csv_row(a)), deterministic_part(to_csv_row(b)));
  b.rank = 4;
  EXPECT_NE(deterministic_part(to_csv_row(a)), deterministic_part(to_csv_row(b)));
}

TEST(Checkpoint, BitwiseRoundTrip) {
  const fs::path dir = scratch("ckpt");
  Rng rng(1);
  ParamSet p;
  p.add("a.weight", rng.normal_tensor(Shape{2, 3, 3, 3}, 1.0));
  p.add("b", Tensor(Shape{4}, std::vector<double>{0.1, -0.0, 1e-310, 3.0}));
  save_checkpoint(p, dir / "p.bin");
  EXPECT_EQ(load_checkpoint(dir / "p.bin"), p);
  EXPECT_EQ(load_checkpoint(dir / "p.bin", p), p);
}

TEST(Checkpoint, TruncationNamesTensor) {
  const fs::path dir = scratch("ckpt_trunc");
  ParamSet p;
  p.add("first", Tensor(Shape{3}, 1.0));
  p.add("second", Tensor(Shape{8}, 2.0));
  save_checkpoint(p, dir / "p.bin");
  const std::string bytes = slurp(dir / "p.bin");
  std::ofstream(dir / "t.bin", std::ios::binary) << bytes.substr(0, bytes.size() - 5);
  try {
    load_checkpoint(dir / "t.bin");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kCorrupt);
    EXPECT_NE(std::string(e.what()).find("second"), std::string::npos) << e.what();
  }
}

TEST(Checkpoint, VersionAndManifest) {
  const fs::path dir = scratch("ckpt_ver");
  ParamSet p;
  p.add("w", Tensor(Shape{2}, 1.0));
  save_checkpoint(p, dir / "p.bin");
  std::string bytes = slurp(dir / "p.bin");
  bytes.replace(bytes.find(" 1\n"), 3, " 9\n");
  std::ofstream(dir / "v.bin", std::ios::binary) << bytes;
  EXPECT_EQ(code_of([&] { load_checkpoint(dir / "v.bin"); }), ErrorCode::kVersionMismatch);

  ParamSet other;
  other.add("w", Tensor(Shape{3}, 1.0));
  other.add("extra", Tensor(Shape{1}));
  try {
    load_checkpoint(dir / "p.bin", other);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kManifestMismatch);
    const std::string msg = e.what();
    EXPECT_NE(msg.find("extra"), std::string::npos) << msg;
    EXPECT_NE(msg.find("w"), std::string::npos) << msg;
  }
}

TEST(Experiment, RunWritesArtifactsAndIsDeterministic) {
  const fs::path dir = scratch("run");
  const ExperimentConfig c = tiny(dir);
  const RunRecord a = run_experiment(c);
  const RunRecord b = run_experiment(c);
  EXPECT_FALSE(a.diverged);
  EXPECT_EQ(a.epoch_losses.size(), 2u);
  EXPECT_TRUE(a.metrics.contains("miou"));
  EXPECT_EQ(deterministic_part(to_csv_row(a)), deterministic_part(to_csv_row(b)));
  const fs::path run = dir / run_name(c);
  EXPECT_TRUE(fs::exists(run / "config.txt"));
  EXPECT_TRUE(fs::exists(run / "record.csv"));
  EXPECT_TRUE(fs::exists(run / "checkpoint.bin"));
  EXPECT_EQ(parse_config(run / "config.txt"), c);
}

TEST(Experiment, ZeroEpochsStillEvaluates) {
  const fs::path dir = scratch("zero");
  ExperimentConfig c = tiny(dir);
  c.epochs = 0;
  const RunRecord r = run_experiment(c);
  EXPECT_TRUE(r.epoch_losses.empty());
  EXPECT_TRUE(r.metrics.contains("pix_acc"));
}

TEST(Experiment, OutputRootEnvOverride) {
  const fs::path dir = scratch("env");
  ExperimentConfig c = tiny(dir / "cfg");
  ::setenv(kOutputRootEnv, (dir / "env").c_str(), 1);
  EXPECT_EQ(output_root(c), dir / "env");
  ::unsetenv(kOutputRootEnv);
  EXPECT_EQ(output_root(c), dir / "cfg");
}

TEST(Ablation, RankAxisParameterCountIncreases) {
  const fs::path dir = scratch("abl_rank");
  ExperimentConfig c = tiny(dir);
  c.epochs = 0;
  const auto res = run_ablation(c, AblationAxis::kRank, {"0", "1", "3"});
  ASSERT_EQ(res.records.size(), 3u);
  EXPECT_LT(res.records[0].parameter_count, res.records[1].parameter_count);
  EXPECT_LT(res.records[1].parameter_count, res.records[2].parameter_count);
  EXPECT_LT(res.records[0].flops, res.records[1].flops);
  EXPECT_TRUE(fs::exists(res.csv_path));
  EXPECT_TRUE(fs::exists(res.dat_path));
  EXPECT_NE(slurp(res.svg_path).find("<svg"), std::string::npos);
}

TEST(Ablation, VariantAxisSharesSeed) {
  const fs::path dir = scratch("abl_var");
  ExperimentConfig c = tiny(dir);
  c.epochs = 1;
  c.steps_per_epoch = 1;
  const auto vals = split_list("none,spatial-only,channel-only,structured,deterministic-low-rank");
  ASSERT_EQ(vals.size(), 5u);
  const auto res = run_ablation(c, AblationAxis::kVariant, vals, 2);
  ASSERT_EQ(res.records.size(), 5u);
  for (const auto& r : res.records) EXPECT_EQ(r.seed, c.seed);
  std::ifstream in(res.csv_path);
  std::string line;
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 6u);
}

TEST(Ablation, RepeatedValueGivesIdenticalRows) {
  const fs::path dir = scratch("abl_same");
  const auto res = run_ablation(tiny(dir), AblationAxis::kRank, {"1", "1"});
  ASSERT_EQ(res.records.size(), 2u);
  EXPECT_EQ(deterministic_part(to_csv_row(res.records[0])),
            deterministic_part(to_csv_row(res.records[1])));
}

TEST(Ablation, DivergedRunDoesNotAbortSweep) {
  const fs::path dir = scratch("abl_div");
  ExperimentConfig c = tiny(dir);
  c.learning_rate = 1e300;
  c.momentum = 0.0;
  const auto res = run_ablation(c, AblationAxis::kRank, {"0", "1"});
  ASSERT_EQ(res.records.size(), 2u);
  for (const auto& r : res.records) {
    EXPECT_TRUE(r.diverged);
    EXPECT_FALSE(r.note.empty());
  }
}

TEST(Ablation, BadValuesRejectedUpFront) {
  const fs::path dir = scratch("abl_bad");
  EXPECT_THROW(run_ablation(tiny(dir), AblationAxis::kRank, {"1", "-2"}), Error);
  EXPECT_THROW(run_ablation(tiny(dir), AblationAxis::kVariant, {"fancy"}), Error);
  EXPECT_THROW(parse_axis("depth"), Error);
  EXPECT_FALSE(fs::exists(dir / "ablation_rank"));
}

TEST(Checks, SuiteNamesAndFailures) {
  std::ostringstream log;
  CheckOptions o;
  o.instances = 5;
  EXPECT_TRUE(all_passed(run_check_suite("invariants", log, o)));
  EXPECT_NE(log.str().find("PASS"), std::string::npos);
  EXPECT_THROW(run_check_suite("everything", log, o), Error);
  EXPECT_FALSE(all_passed({CheckResult{"x", false, 1, 0.0, ""}}));
}

TEST(Checks, RelativeError) {
  const std::vector<double> a{1.0, 2.0}, b{1.0, 2.5};
  EXPECT_DOUBLE_EQ(relative_error(a, b), 0.5 / 2.5);
  const std::vector<double> s{1e-3}, t{0.0};
  EXPECT_DOUBLE_EQ(relative_error(s, t), 1e-3);
}
