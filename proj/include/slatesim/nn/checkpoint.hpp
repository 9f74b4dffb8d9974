#pragma once

#include <slatesim/nn/param_store.hpp>

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace slatesim::nn {

    /// On-disk layout (all integers little-endian):
    ///   "SLSMCKPT" | u32 version | u64 meta length | meta JSON bytes | u32 tensor count |
    ///   per tensor: u32 name length | name | u32 rows | u32 cols | rows*cols f32 (column-major)
    struct CheckpointTensor {
        std::string name;
        std::uint32_t rows = 0;
        std::uint32_t cols = 0;
        std::vector<float> data;
    };

    struct Checkpoint {
        nlohmann::json meta;
        std::vector<CheckpointTensor> tensors;

        const CheckpointTensor* find(const std::string& name) const;
    };

    struct NamedStore {
        std::string prefix;
        const ParamStore<float>* store = nullptr;
    };

    void write_checkpoint(const std::filesystem::path& path, const std::vector<NamedStore>& stores, const nlohmann::json& meta);
    void write_checkpoint(const std::filesystem::path& path, const ParamStore<float>& store, const nlohmann::json& meta);
    Checkpoint read_checkpoint(const std::filesystem::path& path);

    /// Copies every tensor of `store` from `prefix + name` in the checkpoint; shapes must match.
    void load_into(const Checkpoint& checkpoint, const std::string& prefix, ParamStore<float>& store);

} // namespace slatesim::nn
