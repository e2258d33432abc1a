// SPDX-License-Identifier: Apache-2.0
//
// Versioned binary checkpoints of a full EnsembleState.
//
// Layout, all integers and floats little-endian:
//
//   "DGANCKPT"                         8-byte magic
//   u32 format version                 currently 1
//   sections, each:
//     u32 tag, u64 payload length, payload
//   u32 CRC-32 of every preceding byte
//
// Sections appear in this order:
//   1 CONFIG   UTF-8 JSON of the experiment config
//   2 STEP     u64 completed step count
//   3 PARAMS   one per model, generator first then D_0..D_{K-1}:
//              string owner, u64 tensor count, per tensor u64 rows,
//              u64 cols, rows*cols f64 (row-major)
//   4 ADAM     one per model, same order: first moments then second
//              moments, each as u64 count + tensors as above
//   5 RNG      u64 stream count, then strings: data, mask, latent, D_0..
//
// A string is a u64 byte length followed by the bytes.

#pragma once

#include "dropgan/trainer.hpp"

#include <cstdint>
#include <filesystem>
#include <string>

namespace dropgan {

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public IoError {
public:
    using IoError::IoError;
};

struct Checkpoint {
    std::string config_json;
    EnsembleState state;
};

std::string serialize_checkpoint(const EnsembleState& state, const std::string& config_json);
Checkpoint deserialize_checkpoint(const std::string& bytes);

void checkpoint_save(const EnsembleState& state, const std::string& config_json,
                     const std::filesystem::path& path);
Checkpoint checkpoint_load(const std::filesystem::path& path);

}  // namespace dropgan
