#pragma once

#include "config.hpp"

#include <string>

namespace spva::cli {

int cmd_synth(const RunConfig& config);
int cmd_occlusion(const RunConfig& config);
int cmd_prior(const RunConfig& config);
int cmd_solve(const RunConfig& config);
int cmd_eval(const RunConfig& config);
int cmd_bench(const RunConfig& config);

/// Lower-case hex SHA-256 of a file's bytes.
std::string sha256_file(const fs::path& path);

/// Applies SPVA_NUM_THREADS (a positive integer) when it is set.
void apply_thread_override();

}  // namespace spva::cli
