// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "lexeval/run_io.hpp"

namespace lexeval {

// Stable exit contract shared by every command: 0 success, 2 unusable
// input or configuration, 3 backend failure after retries (partial
// artifacts are still written for 3).
inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitBackend = 3;

// Each command validates the config itself, writes its artifacts under
// config.output_dir atomically, appends a run_record.json, and reports
// through the supplied streams (stdout semantics on `out`, diagnostics on
// `err`). Streams are injectable so tests can capture them.

/// Scores a model summary against a reference summary and prints
/// S_checklist, S_residual, S_style, r, and S_overall.
int cmd_eval_ref(const RunConfig& config, const std::filesystem::path& model_summary,
                 const std::filesystem::path& reference_summary, std::ostream& out = std::cout,
                 std::ostream& err = std::cerr);

/// Whole-corpus summary via the summarization prompt.
int cmd_summarize(const RunConfig& config, const std::filesystem::path& corpus_dir,
                  std::ostream& out = std::cout, std::ostream& err = std::cerr);

/// Checklist extraction from a case corpus; method is "e2e", "chunked", or
/// "agent".
int cmd_extract(const RunConfig& config, const std::string& method,
                const std::filesystem::path& corpus_dir, std::ostream& out = std::cout,
                std::ostream& err = std::cerr);

/// Compares two saved checklist states (candidate first, reference second)
/// and reports S_checklist; the residual and style components have no
/// meaning without summaries and are reported as absent.
int cmd_score_states(const RunConfig& config, const std::filesystem::path& candidate_state,
                     const std::filesystem::path& reference_state, std::ostream& out = std::cout,
                     std::ostream& err = std::cerr);

/// Aggregates finished run directories into score / item / specification /
/// usage tables, machine-readable (TSV) and human-readable.
int cmd_report(const RunConfig& config, const std::vector<std::filesystem::path>& run_dirs,
               std::ostream& out = std::cout, std::ostream& err = std::cerr);

/// Agreement metrics between aligned human and model judgment files.
int cmd_meta_eval(const RunConfig& config, const std::filesystem::path& human_file,
                  const std::filesystem::path& model_file, std::ostream& out = std::cout,
                  std::ostream& err = std::cerr);

} // namespace lexeval
