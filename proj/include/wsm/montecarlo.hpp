#pragma once

// Replicated simulation studies and their table output.

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "wsm/core_num.hpp"
#include "wsm/dgp.hpp"
#include "wsm/estimators.hpp"

namespace wsm {

enum class EstimatorId { ckt, vy, rc, pmf_infeasible, pmf_feasible };

std::string_view to_string(EstimatorId id);
EstimatorId parse_estimator_id(std::string_view name);

struct StudyConfig {
  DesignSpec design;
  std::vector<std::size_t> sample_sizes;
  std::size_t replications = 1;
  std::uint64_t seed = 1;
  std::vector<EstimatorId> estimators;
  /// Target of the continuous designs; the multinomial design always reports
  /// Pr{Y_d = j | omega} for d in {0, 1}, j in {1, 2} plus the full vectors.
  Estimand estimand = Estimand::mean(1);
  EstimatorConfig cfg;
  std::size_t threads = 1;

  void validate() const;
};

struct StudyRow {
  DesignSpec design;
  std::size_t n = 0;
  EstimatorId estimator = EstimatorId::ckt;
  std::string target;
  double true_value = 0.0;
  SummaryRow stats;
  double drop_fraction = 0.0;
  std::size_t failures = 0;  // replications where the estimator was undefined
};

struct StudyResult {
  std::vector<StudyRow> rows;
  std::chrono::duration<double> elapsed{};
};

/// Replication r at sample size n uses a sample seeded from (seed, n, r), so
/// rows do not depend on the thread count or on which other sizes are run.
StudyResult run_study(const StudyConfig& study, std::ostream* log = nullptr);

std::uint64_t replication_seed(std::uint64_t seed, std::size_t n, std::size_t r);

enum class TableFormat { csv, markdown };
TableFormat parse_table_format(std::string_view name);

std::string emit_table(const StudyResult& result, TableFormat format);

/// Label of an estimand as it appears in the target column.
std::string target_label(const Estimand& estimand);

/// Git blob hash: SHA-1 of "blob <size>\0" followed by the content.
std::string git_blob_sha1(std::string_view content);

/// Run manifest: config echo, seed and the content hash of the output.
std::string manifest_json(const std::map<std::string, std::string>& config,
                          std::uint64_t seed,
                          std::string_view output_name,
                          std::string_view output_content);

}  // namespace wsm
