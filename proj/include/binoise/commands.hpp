// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "binoise/tasks.hpp"

namespace binoise {

/// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

/// Runs one CLI invocation; args[0] is the verb (gen-data, train, sample,
/// eval, compare). Never throws; errors go to `err` and the exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// A dataset directory as written by gen-data.
struct DatasetDir {
    nlohmann::json manifest;
    ValueRange range;
    PairedDataset data;
};

/// Loads manifest.json and every pair it lists.
DatasetDir load_dataset_dir(const std::filesystem::path& dir);

/// Samples of `split` ("train", "test" or "all").
std::vector<PairedSample> dataset_split(const DatasetDir& ds, const std::string& split);

/// Worker count from BINOISE_THREADS (0 or unset means serial).
unsigned configured_threads();

/// Calls fn(i) for i in [0, n), on up to `threads` workers; ordering of side
/// effects per index is the caller's concern.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn);

}  // namespace binoise
