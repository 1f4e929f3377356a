#pragma once

#include <memory>
#include <string>
#include <vector>

#include "tsadapt/adapter.hpp"
#include "tsadapt/forecaster.hpp"
#include "tsadapt/optimizer.hpp"
#include "tsadapt/preprocess.hpp"

namespace tsadapt::io {

using num::Matrix;

/**
 * @brief Self-contained snapshot of a fitted adapter, its frozen forecaster
 * and the preprocessing pipeline.
 *
 * On disk: magic "TSAC", u32 format version, u32 header length, a JSON header
 * carrying the configuration plus a tensor manifest, then the tensors as
 * row-major 64-bit floats, little-endian, in manifest order. Save followed by
 * load reproduces every tensor bit-exactly.
 */
struct Checkpoint {
    adapters::AdapterConfig adapter;
    std::string config_hash;              // 16 lowercase hex digits
    std::string fm_type;                  // "linear" or "mlp"
    std::vector<optim::Param> params;     // adapter tensors, construction order
    std::vector<optim::Param> fm_params;  // forecaster tensors, fixed order
    data::Pipeline pipeline;
};

/// Captures the adapter, forecaster weights and pipeline statistics. Only
/// linear and mlp forecasters can be serialized.
Checkpoint make_checkpoint(const adapters::Adapter& ad, const fm::FrozenForecaster& f,
                           const data::Pipeline& pipeline, const std::string& config_hash);

void save_checkpoint(const Checkpoint& c, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

/// Rebuilds the adapter with the stored tensors loaded over a fresh instance.
adapters::Adapter restore_adapter(const Checkpoint& c);

/// Rebuilds the forecaster from its stored tensors.
std::unique_ptr<fm::FrozenForecaster> restore_forecaster(const Checkpoint& c);

}  // namespace tsadapt::io
