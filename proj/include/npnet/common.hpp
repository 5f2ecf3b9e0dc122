#pragma once

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>

namespace npnet {

/// Runtime failure (bad state, corrupt file, numerical misuse).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad user input: config files, CLI arguments, missing datasets.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Worker count from NPNET_THREADS (0 or unset = sequential). Cached on first call.
int thread_count();

/// Runs fn over [0,n) in contiguous chunks. The partitioning keeps every output
/// element owned by exactly one worker, so results are bitwise identical to the
/// sequential order regardless of thread count.
void parallel_for(std::size_t n, std::size_t grain,
                  const std::function<void(std::size_t, std::size_t)>& fn);

std::string version_string();

} // namespace npnet
