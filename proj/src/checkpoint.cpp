#include "tsadapt/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <utility>

#include <json.hpp>

namespace tsadapt::io {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr char kMagic[4] = {'T', 'S', 'A', 'C'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const std::string& s, std::size_t pos) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
        v |= static_cast<std::uint32_t>(static_cast<unsigned char>(s[pos + i])) << (8 * i);
    }
    return v;
}

void put_f64(std::string& out, double v) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, &v, sizeof bits);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

double get_f64(const std::string& s, std::size_t pos) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) {
        bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(s[pos + i])) << (8 * i);
    }
    double v = 0.0;
    std::memcpy(&v, &bits, sizeof v);
    return v;
}

void put_matrix(std::string& out, const Matrix& m) {
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) put_f64(out, m(r, c));
    }
}

std::string scaler_kind_name(data::ScalerKind k) {
    return k == data::ScalerKind::standard ? "standard" : "minmax";
}

data::ScalerKind scaler_kind_from(const std::string& s) {
    if (s == "standard") return data::ScalerKind::standard;
    if (s == "minmax") return data::ScalerKind::minmax;
    throw std::runtime_error("checkpoint load: unknown scaler kind '" + s + "'");
}

/// name -> shape list in serialization order.
std::vector<std::pair<std::string, const Matrix*>> tensor_list(const Checkpoint& c) {
    std::vector<std::pair<std::string, const Matrix*>> out;
    for (const optim::Param& p : c.params) out.emplace_back("param." + p.name, &p.value);
    for (const optim::Param& p : c.fm_params) out.emplace_back(p.name, &p.value);
    if (c.pipeline.scaler) {
        out.emplace_back("pipe.scaler.offset", &c.pipeline.scaler->offset);
        out.emplace_back("pipe.scaler.divisor", &c.pipeline.scaler->divisor);
    }
    if (c.pipeline.pca) {
        out.emplace_back("pipe.pca.mean", &c.pipeline.pca->mean);
        out.emplace_back("pipe.pca.components", &c.pipeline.pca->components);
    }
    return out;
}

}  // namespace

Checkpoint make_checkpoint(const adapters::Adapter& ad, const fm::FrozenForecaster& f,
                           const data::Pipeline& pipeline, const std::string& config_hash) {
    Checkpoint c;
    c.adapter = ad.config();
    c.config_hash = config_hash;
    c.params = ad.params();
    c.pipeline = pipeline;
    if (const auto* lin = dynamic_cast<const fm::LinearFm*>(&f)) {
        c.fm_type = "linear";
        c.fm_params.emplace_back("fm.w", lin->w());
        c.fm_params.emplace_back("fm.b", lin->b());
    } else if (const auto* mlp = dynamic_cast<const fm::MlpFm*>(&f)) {
        c.fm_type = "mlp";
        c.fm_params.emplace_back("fm.w1", mlp->w1());
        c.fm_params.emplace_back("fm.b1", mlp->b1());
        c.fm_params.emplace_back("fm.w2", mlp->w2());
        c.fm_params.emplace_back("fm.b2", mlp->b2());
    } else {
        throw std::runtime_error("checkpoint: forecaster '" + f.name() +
                                 "' cannot be serialized");
    }
    return c;
}

void save_checkpoint(const Checkpoint& c, const std::string& path) {
    ordered_json h;
    h["adapter"]["kind"] = to_string(c.adapter.kind);
    h["adapter"]["d_in"] = c.adapter.d_in;
    h["adapter"]["d_latent"] = c.adapter.d_latent;
    h["adapter"]["dropout_p"] = c.adapter.dropout_p;
    h["adapter"]["hidden"] = c.adapter.hidden;
    h["adapter"]["layers"] = c.adapter.layers;
    h["adapter"]["sigma2_auto"] = c.adapter.sigma2_auto;
    h["config_hash"] = c.config_hash;
    h["forecaster"]["type"] = c.fm_type;
    h["pipeline"]["scaler"] =
        c.pipeline.scaler ? scaler_kind_name(c.pipeline.scaler->kind) : "none";
    h["pipeline"]["pca"] = c.pipeline.pca.has_value();
    h["pipeline"]["revin"] = c.pipeline.revin;
    h["pipeline"]["revin_eps"] = c.pipeline.revin_eps;
    if (c.pipeline.pca) h["pipeline"]["explained_variance"] = c.pipeline.pca->explained_variance;

    const auto tensors = tensor_list(c);
    h["tensors"] = ordered_json::array();
    for (const auto& [name, m] : tensors) {
        h["tensors"].push_back({{"name", name}, {"rows", m->rows()}, {"cols", m->cols()}});
    }

    std::string blob;
    blob.append(kMagic, 4);
    const std::string header = h.dump();
    put_u32(blob, kVersion);
    put_u32(blob, static_cast<std::uint32_t>(header.size()));
    blob += header;
    for (const auto& [name, m] : tensors) put_matrix(blob, *m);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("checkpoint save: cannot open '" + path + "'");
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out) throw std::runtime_error("checkpoint save: write failed for '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint load: cannot open '" + path + "'");
    std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    if (blob.size() < 12) throw std::runtime_error("checkpoint load: truncated file '" + path + "'");
    if (std::memcmp(blob.data(), kMagic, 4) != 0) {
        throw std::runtime_error("checkpoint load: '" + path + "' is not a checkpoint file");
    }
    const std::uint32_t version = get_u32(blob, 4);
    if (version != kVersion) {
        throw std::runtime_error("checkpoint load: unsupported version " +
                                 std::to_string(version) + ", expected " +
                                 std::to_string(kVersion));
    }
    const std::uint32_t header_len = get_u32(blob, 8);
    if (blob.size() < 12 + static_cast<std::size_t>(header_len)) {
        throw std::runtime_error("checkpoint load: truncated file '" + path + "'");
    }
    ordered_json h;
    try {
        h = ordered_json::parse(blob.substr(12, header_len));
    } catch (const nlohmann::json::exception&) {
        throw std::runtime_error("checkpoint load: corrupt header in '" + path + "'");
    }

    Checkpoint c;
    try {
        const auto& a = h.at("adapter");
        c.adapter.kind = adapters::adapter_kind_from_string(a.at("kind").get<std::string>());
        c.adapter.d_in = a.at("d_in").get<std::size_t>();
        c.adapter.d_latent = a.at("d_latent").get<std::size_t>();
        c.adapter.dropout_p = a.at("dropout_p").get<double>();
        c.adapter.hidden = a.at("hidden").get<std::size_t>();
        c.adapter.layers = a.at("layers").get<std::size_t>();
        c.adapter.sigma2_auto = a.at("sigma2_auto").get<bool>();
        c.config_hash = h.at("config_hash").get<std::string>();
        c.fm_type = h.at("forecaster").at("type").get<std::string>();
        const auto& p = h.at("pipeline");
        const std::string scaler = p.at("scaler").get<std::string>();
        if (scaler != "none") {
            c.pipeline.scaler = data::Scaler{};
            c.pipeline.scaler->kind = scaler_kind_from(scaler);
        }
        if (p.at("pca").get<bool>()) {
            c.pipeline.pca = num::PcaModel{};
            c.pipeline.pca->explained_variance =
                p.at("explained_variance").get<std::vector<double>>();
        }
        c.pipeline.revin = p.at("revin").get<bool>();
        c.pipeline.revin_eps = p.at("revin_eps").get<double>();
    } catch (const nlohmann::json::exception&) {
        throw std::runtime_error("checkpoint load: corrupt header in '" + path + "'");
    }

    std::size_t pos = 12 + header_len;
    std::size_t total = 0;
    for (const auto& t : h.at("tensors")) {
        total += t.at("rows").get<std::size_t>() * t.at("cols").get<std::size_t>() * 8;
    }
    if (blob.size() != pos + total) {
        throw std::runtime_error("checkpoint load: tensor data is " +
                                 std::to_string(blob.size() - pos) + " bytes, manifest needs " +
                                 std::to_string(total));
    }

    for (const auto& t : h.at("tensors")) {
        const std::string name = t.at("name").get<std::string>();
        const std::size_t rows = t.at("rows").get<std::size_t>();
        const std::size_t cols = t.at("cols").get<std::size_t>();
        Matrix m(rows, cols, 0.0);
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t col = 0; col < cols; ++col) {
                m(r, col) = get_f64(blob, pos);
                pos += 8;
            }
        }
        if (name.rfind("param.", 0) == 0) {
            c.params.emplace_back(name.substr(6), std::move(m));
        } else if (name.rfind("fm.", 0) == 0) {
            c.fm_params.emplace_back(name, std::move(m));
        } else if (name == "pipe.scaler.offset" && c.pipeline.scaler) {
            c.pipeline.scaler->offset = std::move(m);
        } else if (name == "pipe.scaler.divisor" && c.pipeline.scaler) {
            c.pipeline.scaler->divisor = std::move(m);
        } else if (name == "pipe.pca.mean" && c.pipeline.pca) {
            c.pipeline.pca->mean = std::move(m);
        } else if (name == "pipe.pca.components" && c.pipeline.pca) {
            c.pipeline.pca->components = std::move(m);
        } else {
            throw std::runtime_error("checkpoint load: unexpected tensor '" + name + "'");
        }
    }
    return c;
}

adapters::Adapter restore_adapter(const Checkpoint& c) {
    adapters::Adapter ad(c.adapter, num::Rng(0));
    ad.load_params(c.params);
    return ad;
}

std::unique_ptr<fm::FrozenForecaster> restore_forecaster(const Checkpoint& c) {
    auto tensor = [&](const char* name) -> const Matrix& {
        for (const optim::Param& p : c.fm_params) {
            if (p.name == name) return p.value;
        }
        throw std::runtime_error(std::string("checkpoint: missing forecaster tensor '") + name +
                                 "'");
    };
    if (c.fm_type == "linear") {
        return std::make_unique<fm::LinearFm>(tensor("fm.w"), tensor("fm.b"));
    }
    if (c.fm_type == "mlp") {
        return std::make_unique<fm::MlpFm>(tensor("fm.w1"), tensor("fm.b1"), tensor("fm.w2"),
                                           tensor("fm.b2"));
    }
    throw std::runtime_error("checkpoint: unknown forecaster type '" + c.fm_type + "'");
}

}  // namespace tsadapt::io
