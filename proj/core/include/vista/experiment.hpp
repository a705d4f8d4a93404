#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "vista/config.hpp"
#include "vista/params.hpp"
#include "vista/tasks.hpp"

namespace vista {

/// Environment variable that, when set, replaces ExperimentConfig::output_dir.
inline constexpr const char* kOutputRootEnv = "VISTA_OUTPUT_ROOT";

/// Result of one training run.
struct RunRecord {
  std::string config_hash;
  TaskKind task = TaskKind::kSegmentation;
  AttentionVariant variant = AttentionVariant::kStructured;
  int rank = 1;
  std::uint64_t seed = 0;
  std::vector<double> epoch_losses;  ///< mean training loss per epoch
  MetricReport metrics;              ///< held-out split, empty if diverged
  std::size_t parameter_count = 0;
  std::uint64_t flops = 0;           ///< analytic, per forward
  bool diverged = false;
  std::string note;                  ///< divergence or failure reason
  double forward_ms = 0.0;           ///< min wall time of one forward
  std::string timestamp;             ///< UTC, ISO 8601

  friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

/// CSV columns, in order:
///   config_hash, task, variant, rank, seed, epochs, parameter_count, flops,
///   diverged, final_loss, epoch_losses, metrics, warnings, note,
///   forward_ms, timestamp
/// epoch_losses is ';'-separated; metrics is ';'-separated name=value pairs.
/// Reals are written with 17 significant digits so rows parse back exactly.
/// The last two columns are measurements and vary between identical runs.
std::string csv_header();
std::string to_csv_row(const RunRecord& r);
RunRecord parse_csv_row(std::string_view row);
/// Row without the trailing measured columns (forward_ms, timestamp).
std::string deterministic_part(std::string_view row);

/// Output root for cfg: $VISTA_OUTPUT_ROOT if set and non-empty, else
/// cfg.output_dir.
std::filesystem::path output_root(const ExperimentConfig& cfg);

/// Directory name of a run: <task>_<variant>_T<rank>_s<seed>_<hash8>.
std::string run_name(const ExperimentConfig& cfg);

/// Held-out samples for cfg (fixed seeds disjoint from training).
std::vector<SyntheticSample> eval_split(const ExperimentConfig& cfg);

/// Evaluates params on samples and returns the pooled metric report.
MetricReport evaluate(const ParamSet& params, const ExperimentConfig& cfg,
                      const std::vector<SyntheticSample>& samples);

/// Trains on freshly generated batches, evaluates on the held-out split and
/// writes record.csv, config.txt and checkpoint.bin under
/// output_root(cfg)/run_name(cfg). A non-finite loss stops training and
/// returns a record flagged diverged.
RunRecord run_experiment(const ExperimentConfig& cfg);

enum class AblationAxis { kVariant, kRank };
std::string_view to_string(AblationAxis axis);
AblationAxis parse_axis(std::string_view text);

struct AblationResult {
  AblationAxis axis = AblationAxis::kVariant;
  std::vector<std::string> values;
  std::vector<RunRecord> records;
  std::filesystem::path csv_path;
  std::filesystem::path dat_path;
  std::filesystem::path svg_path;
};

/// Runs base with each value substituted on the axis (shared seed). Runs may
/// use up to `jobs` threads; outputs are written after all runs finish to
/// output_root(base)/ablation_<axis>/{comparison.csv, plot.dat, plot.svg}.
/// A failing run is recorded as diverged with the reason in note.
AblationResult run_ablation(const ExperimentConfig& base, AblationAxis axis,
                            const std::vector<std::string>& values,
                            std::size_t jobs = 1);

/// Splits "a,b,c" (whitespace tolerant).
std::vector<std::string> split_list(std::string_view text);

}  // namespace vista
