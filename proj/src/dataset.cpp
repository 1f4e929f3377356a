#include "tsadapt/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace tsadapt::data {

std::size_t TimeSeriesDataset::split_begin(Split s) const {
    switch (s) {
        case Split::train: return 0;
        case Split::val: return split.train_end;
        case Split::test: return split.val_end;
    }
    throw std::logic_error("unreachable");
}

std::size_t TimeSeriesDataset::split_end(Split s) const {
    switch (s) {
        case Split::train: return split.train_end;
        case Split::val: return split.val_end;
        case Split::test: return length();
    }
    throw std::logic_error("unreachable");
}

TimeSeriesDataset generate_synthetic(const Rng& rng, SyntheticMode mode, std::size_t T,
                                     double signal_scale, double test_offset) {
    if (T < 1024) throw std::invalid_argument("generate_synthetic: T must be >= 1024");
    if (signal_scale <= 0.0) {
        throw std::invalid_argument("generate_synthetic: signal_scale must be positive");
    }
    constexpr std::size_t kBases = 5;
    constexpr double kTwoPi = 6.28318530717958647692;

    Rng amp_rng = rng.split(1);
    Rng phase_rng = rng.split(2);
    Rng base_noise_rng = rng.split(3);
    Rng mix_rng = rng.split(4);
    Rng chan_noise_rng = rng.split(5);

    double freqs[kBases], amps[kBases], phases[kBases];
    for (std::size_t k = 0; k < kBases; ++k) {
        freqs[k] = (1.0 / 256.0) * std::pow(16.0, static_cast<double>(k) / (kBases - 1));
        amps[k] = signal_scale * amp_rng.uniform(0.5, 2.0);
        phases[k] = phase_rng.uniform(0.0, kTwoPi);
    }

    Matrix bases(T, kBases, 0.0);
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t k = 0; k < kBases; ++k) {
            bases(t, k) = amps[k] * std::sin(kTwoPi * freqs[k] * t + phases[k]) +
                          0.05 * signal_scale * base_noise_rng.normal();
        }
    }

    TimeSeriesDataset ds;
    ds.granularity = "1 step";
    if (mode == SyntheticMode::uncorrelated) {
        ds.values = bases;
    } else {
        constexpr std::size_t kChannels = 8;
        Matrix mix(kBases, kChannels, 0.0);
        for (std::size_t k = 0; k < kBases; ++k)
            for (std::size_t d = 0; d < kChannels; ++d) mix(k, d) = mix_rng.uniform(-1.0, 1.0);
        const double sigmas[3] = {0.1, 0.2, 0.5};
        ds.values = num::matmul(bases, mix);
        for (std::size_t t = 0; t < T; ++t) {
            for (std::size_t d = 0; d < kChannels; ++d) {
                ds.values(t, d) += signal_scale * sigmas[d % 3] * chan_noise_rng.normal();
            }
        }
    }
    for (std::size_t d = 0; d < ds.channels(); ++d) {
        ds.channel_names.push_back("ch" + std::to_string(d));
    }
    ds.split.train_end = static_cast<std::size_t>(0.6 * static_cast<double>(T));
    ds.split.val_end = static_cast<std::size_t>(0.8 * static_cast<double>(T));

    if (test_offset != 0.0) {
        for (std::size_t t = ds.split.val_end; t < T; ++t)
            for (std::size_t d = 0; d < ds.channels(); ++d) ds.values(t, d) += test_offset;
    }
    return ds;
}

WindowBatch make_windows(const TimeSeriesDataset& ds, Split split, std::size_t L,
                         std::size_t H, std::size_t stride) {
    if (L == 0 || H == 0) throw std::invalid_argument("make_windows: L and H must be >= 1");
    if (stride == 0) throw std::invalid_argument("make_windows: stride must be >= 1");
    const std::size_t lo = ds.split_begin(split), hi = ds.split_end(split);
    const std::size_t n = hi - lo;
    if (n < L + H) {
        throw std::invalid_argument("make_windows: split has " + std::to_string(n) +
                                    " steps, needs at least L + H = " + std::to_string(L + H));
    }
    const std::size_t D = ds.channels();
    WindowBatch batch;
    for (std::size_t s = lo; s + L + H <= hi; s += stride) {
        Matrix ctx(L, D, 0.0), tgt(H, D, 0.0);
        for (std::size_t i = 0; i < L; ++i)
            for (std::size_t d = 0; d < D; ++d) ctx(i, d) = ds.values(s + i, d);
        for (std::size_t i = 0; i < H; ++i)
            for (std::size_t d = 0; d < D; ++d) tgt(i, d) = ds.values(s + L + i, d);
        batch.contexts.push_back(std::move(ctx));
        batch.targets.push_back(std::move(tgt));
        batch.starts.push_back(s);
    }
    return batch;
}

namespace {

struct KnownSplit {
    std::size_t steps, channels, train, val;
};

// Published benchmark splits, keyed by exact (T, D).
constexpr KnownSplit kKnownSplits[] = {
    {13603, 7, 8033, 2785},    // hourly transformer-temperature set
    {169, 7, 69, 2},           // weekly illness set
    {6791, 8, 4704, 665},      // daily exchange-rate set
    {51899, 21, 36280, 5175},  // 10-minute weather set
};

SplitRanges default_split(std::size_t T, std::size_t D) {
    for (const KnownSplit& k : kKnownSplits) {
        if (k.steps == T && k.channels == D) {
            return SplitRanges{k.train, k.train + k.val};
        }
    }
    return SplitRanges{static_cast<std::size_t>(0.6 * static_cast<double>(T)),
                       static_cast<std::size_t>(0.8 * static_cast<double>(T))};
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace

TimeSeriesDataset load_csv(const std::string& path, bool date_column) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_csv: cannot open '" + path + "'");

    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("load_csv: empty file '" + path + "'");
    std::vector<std::string> header = split_fields(line);
    const std::size_t skip = date_column ? 1 : 0;
    if (header.size() <= skip) {
        throw std::runtime_error("load_csv: header has no data columns");
    }
    const std::size_t D = header.size() - skip;

    std::vector<double> values;
    std::size_t rows = 0;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> fields = split_fields(line);
        if (fields.size() != header.size()) {
            throw std::runtime_error("load_csv: row " + std::to_string(lineno) + " has " +
                                     std::to_string(fields.size()) + " fields, expected " +
                                     std::to_string(header.size()));
        }
        for (std::size_t c = skip; c < fields.size(); ++c) {
            const std::string& f = fields[c];
            char* end = nullptr;
            const double v = std::strtod(f.c_str(), &end);
            if (f.empty() || end != f.c_str() + f.size()) {
                throw std::runtime_error("load_csv: row " + std::to_string(lineno) +
                                         ", column " + std::to_string(c + 1) +
                                         ": cannot parse '" + f + "' as a number");
            }
            values.push_back(v);
        }
        ++rows;
    }
    if (rows == 0) throw std::runtime_error("load_csv: no data rows in '" + path + "'");

    TimeSeriesDataset ds;
    ds.values = Matrix(rows, D, std::move(values));
    ds.channel_names.assign(header.begin() + static_cast<std::ptrdiff_t>(skip), header.end());
    ds.granularity = "unknown";
    ds.split = default_split(rows, D);
    return ds;
}

void save_csv(const TimeSeriesDataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_csv: cannot open '" + path + "' for writing");
    for (std::size_t d = 0; d < ds.channels(); ++d) {
        if (d) out << ',';
        out << (d < ds.channel_names.size() ? ds.channel_names[d]
                                            : "ch" + std::to_string(d));
    }
    out << '\n';
    char buf[64];
    for (std::size_t t = 0; t < ds.length(); ++t) {
        for (std::size_t d = 0; d < ds.channels(); ++d) {
            if (d) out << ',';
            std::snprintf(buf, sizeof buf, "%.17g", ds.values(t, d));
            out << buf;
        }
        out << '\n';
    }
    if (!out) throw std::runtime_error("save_csv: write failed for '" + path + "'");
}

}  // namespace tsadapt::data
