#ifndef MIL_CHECKPOINT_HPP
#define MIL_CHECKPOINT_HPP

#include <string>

#include "mil/model.hpp"
#include "mil/train_config.hpp"

namespace mil {

// Serialized model snapshot. On-disk layout (all little-endian):
//   magic "MILCKPT", u32 format version = 1,
//   u64 blob length + UTF-8 JSON blob (classifier / pooling / train
//   config and best-epoch metadata),
//   then per-tensor records until EOF:
//     u64 name length + name bytes, u32 rank, u64 extents, f64 payload.
// Save -> load -> save round-trips byte-identically.
struct Checkpoint {
    std::uint32_t format_version = 1;
    InstanceClassifierConfig classifier;
    PoolingConfig pooling;
    ModelParams params;
    TrainConfig train_snapshot;
    int best_epoch = -1;
    double best_val_loss = 0.0;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);  // throws IngestError

}  // namespace mil

#endif
