#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "reface/common.hpp"

namespace reface::train {

// On-disk layout: magic "APB2", u32 LE version, u32 LE entry count, then per
// entry: u16 LE name length, name bytes, u8 rank, rank x u32 LE dims, u8 tag,
// payload. Tag 0 = f32 LE tensor data, tag 1 = raw bytes (rank is 1 and
// dims[0] is the byte count) used for the reserved bookkeeping entries
// (config echo, step counters, sampler state).
inline constexpr uint32_t kCheckpointVersion = 1;
inline constexpr uint8_t kTagF32 = 0;
inline constexpr uint8_t kTagBytes = 1;

struct CheckpointEntry {
    std::string name;
    uint8_t tag = kTagF32;
    std::vector<int> shape;
    std::vector<float> f32;       // tag 0 payload
    std::vector<uint8_t> bytes;   // tag 1 payload
};

CheckpointEntry make_f32_entry(std::string name, std::vector<int> shape, std::vector<float> data);
CheckpointEntry make_bytes_entry(std::string name, std::vector<uint8_t> bytes);
CheckpointEntry make_u64_entry(std::string name, uint64_t value);
uint64_t read_u64_entry(const CheckpointEntry& e);

void save_checkpoint_file(const std::string& path, const std::vector<CheckpointEntry>& entries);
// Throws ValueError on missing file, bad magic/version, or truncation.
std::vector<CheckpointEntry> load_checkpoint_file(const std::string& path);

}  // namespace reface::train
