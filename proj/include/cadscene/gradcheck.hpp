#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace cadscene {

/// Finite-difference verification of every analytic gradient in the
/// pipeline. Each check builds a small random instance from `seed`, compares
/// the analytic gradient of a scalar objective with central differences, and
/// reports one entry per parameter block.
///
/// Error metric per block: ||analytic - numeric||_2 / max(||analytic||_2,
/// ||numeric||_2), or the absolute difference when both norms are below
/// 1e-10.
struct GradCheckEntry {
  std::string name;
  double error = 0.0;
};

struct GradCheckOptions {
  double step = 1e-6;
  double tolerance = 1e-4;
};

std::vector<GradCheckEntry> check_dcr_gradients(std::uint64_t seed, const GradCheckOptions& = {});
std::vector<GradCheckEntry> check_encoder_gradients(std::uint64_t seed,
                                                    const GradCheckOptions& = {});
std::vector<GradCheckEntry> check_contrastive_gradients(std::uint64_t seed, bool normalize_anchors,
                                                        const GradCheckOptions& = {});
std::vector<GradCheckEntry> check_end_to_end_gradients(std::uint64_t seed,
                                                       const GradCheckOptions& = {});

struct GradCheckRow {
  std::string name;       // "<suite>/<block>"
  double worst_error = 0.0;
  int trials = 0;
  bool passed = true;
};

/// Runs every suite over seeds [first_seed, first_seed + trials) and keeps
/// the worst error per block.
std::vector<GradCheckRow> run_gradcheck_suite(std::uint64_t first_seed, int trials,
                                              const GradCheckOptions& = {});

void print_gradcheck_table(std::ostream& out, const std::vector<GradCheckRow>& rows);

}  // namespace cadscene
