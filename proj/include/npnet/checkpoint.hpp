#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "npnet/serialize.hpp"
#include "npnet/trainer.hpp"

namespace npnet {

/// Full training snapshot: live state, the embedded best-VCE state, schedule
/// position, metrics so far, and the rng stream. The binary layout is
/// little-endian throughout and documented in docs/checkpoint-format.md.
struct Checkpoint {
    std::uint64_t config_hash = 0;
    std::uint8_t norm_mode = 0;
    TrainerState current;
    bool has_best = false;
    TrainerState best;
    ScheduleState sched;
    std::int64_t epoch = 0;
    MetricsLog log;

    Checkpoint() = default;
    Checkpoint(const Checkpoint& o);
    Checkpoint& operator=(const Checkpoint& o);
    Checkpoint(Checkpoint&&) = default;
    Checkpoint& operator=(Checkpoint&&) = default;
};

std::unique_ptr<OptimizerState> load_opt_state(BinReader& r);

void save_params(BinWriter& w, const NetworkParams& params);
NetworkParams load_params(BinReader& r);

/// Writes atomically (temp file + rename).
void save_checkpoint(const Checkpoint& ck, const std::string& path);

/// expected_config_hash != 0 enforces a match and refuses the file otherwise.
Checkpoint restore_checkpoint(const std::string& path, std::uint64_t expected_config_hash);

/// A trained model is the same container; eval needs only params + norm mode.
void save_model(const NetworkParams& params, NormMode norm, std::uint64_t config_hash,
                const std::string& path);
struct LoadedModel {
    NetworkParams params;
    ModelConfig config;
    std::uint64_t config_hash = 0;
};
LoadedModel load_model(const std::string& path);

} // namespace npnet
