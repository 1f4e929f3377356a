#include "tsadapt/config.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

#include "tsadapt/adapter.hpp"
#include "tsadapt/hash.hpp"

namespace tsadapt::cli {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

[[noreturn]] void fail(std::size_t lineno, const std::string& what) {
    throw std::invalid_argument("config: line " + std::to_string(lineno) + ": " + what);
}

double parse_double(const std::string& v, std::size_t lineno) {
    std::size_t used = 0;
    double d = 0.0;
    try {
        d = std::stod(v, &used);
    } catch (const std::exception&) {
        fail(lineno, "cannot parse '" + v + "' as a number");
    }
    if (used != v.size()) fail(lineno, "cannot parse '" + v + "' as a number");
    return d;
}

std::uint64_t parse_u64(const std::string& v, std::size_t lineno) {
    std::size_t used = 0;
    std::uint64_t u = 0;
    try {
        u = std::stoull(v, &used);
    } catch (const std::exception&) {
        fail(lineno, "cannot parse '" + v + "' as an unsigned integer");
    }
    if (used != v.size()) fail(lineno, "cannot parse '" + v + "' as an unsigned integer");
    return u;
}

std::size_t parse_size(const std::string& v, std::size_t lineno) {
    return static_cast<std::size_t>(parse_u64(v, lineno));
}

bool parse_bool(const std::string& v, std::size_t lineno) {
    if (v == "true") return true;
    if (v == "false") return false;
    fail(lineno, "cannot parse '" + v + "' as a bool (use true/false)");
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(trim(item));
    if (!out.empty() && out.back().empty()) out.pop_back();
    return out;
}

std::vector<double> parse_double_list(const std::string& v, std::size_t lineno) {
    std::vector<double> out;
    for (const std::string& item : split_list(v)) out.push_back(parse_double(item, lineno));
    return out;
}

std::vector<std::size_t> parse_size_list(const std::string& v, std::size_t lineno) {
    std::vector<std::size_t> out;
    for (const std::string& item : split_list(v)) out.push_back(parse_size(item, lineno));
    return out;
}

void check_choice(const std::string& v, std::initializer_list<const char*> allowed,
                  const std::string& key, std::size_t lineno) {
    for (const char* a : allowed) {
        if (v == a) return;
    }
    std::string options;
    for (const char* a : allowed) options += (options.empty() ? "" : ", ") + std::string(a);
    fail(lineno, "invalid value '" + v + "' for " + key + " (expected one of: " + options + ")");
}

void apply_key(ExperimentConfig& c, const std::string& section, const std::string& key,
               const std::string& v, std::size_t lineno) {
    const std::string where = "[" + section + "] " + key;
    if (section == "run") {
        if (key == "seed") c.run.seed = parse_u64(v, lineno);
        else if (key == "out_dir") c.run.out_dir = v;
        else if (key == "s_samples") c.run.s_samples = parse_size(v, lineno);
        else fail(lineno, "unknown key '" + key + "' in section [run]");
        return;
    }
    if (section == "data") {
        if (key == "source") {
            check_choice(v, {"synthetic", "csv"}, where, lineno);
            c.data.source = v;
        } else if (key == "synthetic_mode") {
            check_choice(v, {"uncorrelated", "correlated"}, where, lineno);
            c.data.synthetic_mode = v;
        } else if (key == "length") c.data.length = parse_size(v, lineno);
        else if (key == "signal_scale") c.data.signal_scale = parse_double(v, lineno);
        else if (key == "test_offset") c.data.test_offset = parse_double(v, lineno);
        else if (key == "csv_path") c.data.csv_path = v;
        else if (key == "date_column") c.data.date_column = parse_bool(v, lineno);
        else if (key == "context") c.data.context = parse_size(v, lineno);
        else if (key == "horizon") c.data.horizon = parse_size(v, lineno);
        else if (key == "train_stride") c.data.train_stride = parse_size(v, lineno);
        else if (key == "eval_stride") c.data.eval_stride = parse_size(v, lineno);
        else if (key == "scaler") {
            check_choice(v, {"standard", "minmax", "none"}, where, lineno);
            c.data.scaler = v;
        } else if (key == "pca") c.data.pca = parse_bool(v, lineno);
        else fail(lineno, "unknown key '" + key + "' in section [data]");
        return;
    }
    if (section == "forecaster") {
        if (key == "type") {
            check_choice(v, {"linear", "mlp"}, where, lineno);
            c.forecaster.type = v;
        } else if (key == "seed") c.forecaster.seed = parse_u64(v, lineno);
        else if (key == "hidden") c.forecaster.hidden = parse_size(v, lineno);
        else fail(lineno, "unknown key '" + key + "' in section [forecaster]");
        return;
    }
    if (section == "adapter") {
        if (key == "kind") {
            adapters::adapter_kind_from_string(v);  // validates, throws on typo
            c.adapter.kind = v;
        } else if (key == "d_latent") c.adapter.d_latent = parse_size(v, lineno);
        else if (key == "dropout_p") c.adapter.dropout_p = parse_double(v, lineno);
        else if (key == "hidden") c.adapter.hidden = parse_size(v, lineno);
        else if (key == "layers") c.adapter.layers = parse_size(v, lineno);
        else if (key == "beta") c.adapter.beta = parse_double(v, lineno);
        else if (key == "sigma2") c.adapter.sigma2 = parse_double(v, lineno);
        else if (key == "sigma2_auto") c.adapter.sigma2_auto = parse_bool(v, lineno);
        else fail(lineno, "unknown key '" + key + "' in section [adapter]");
        return;
    }
    if (section == "training") {
        if (key == "epochs") c.training.epochs = parse_size(v, lineno);
        else if (key == "batch_size") c.training.batch_size = parse_size(v, lineno);
        else if (key == "lr") c.training.lr = parse_double(v, lineno);
        else if (key == "scheduler") {
            check_choice(v, {"constant", "one_cycle", "plateau"}, where, lineno);
            c.training.scheduler = v;
        } else if (key == "patience") c.training.patience = parse_size(v, lineno);
        else if (key == "factor") c.training.factor = parse_double(v, lineno);
        else if (key == "min_lr") c.training.min_lr = parse_double(v, lineno);
        else if (key == "revin") c.training.revin = parse_bool(v, lineno);
        else if (key == "k_folds") c.training.k_folds = parse_size(v, lineno);
        else fail(lineno, "unknown key '" + key + "' in section [training]");
        return;
    }
    if (section == "experiment") {
        if (key == "n_trials") c.experiment.n_trials = parse_size(v, lineno);
        else if (key == "component_sweep") c.experiment.component_sweep = parse_size_list(v, lineno);
        else if (key == "beta_sweep") c.experiment.beta_sweep = parse_double_list(v, lineno);
        else if (key == "log_sigma2_sweep")
            c.experiment.log_sigma2_sweep = parse_double_list(v, lineno);
        else if (key == "include_auto") c.experiment.include_auto = parse_bool(v, lineno);
        else fail(lineno, "unknown key '" + key + "' in section [experiment]");
        return;
    }
    fail(lineno, "unknown section [" + section + "]");
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + fmt(v[i]);
    return out;
}

std::string fmt(const std::vector<std::size_t>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
    return out;
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig cfg;
    std::string section;
    std::stringstream ss(text);
    std::string raw;
    std::size_t lineno = 0;
    while (std::getline(ss, raw)) {
        ++lineno;
        const std::size_t hash = raw.find('#');
        const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') fail(lineno, "malformed section header '" + line + "'");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty()) fail(lineno, "empty section name");
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) fail(lineno, "expected 'key = value', got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) fail(lineno, "empty key");
        if (section.empty()) fail(lineno, "key '" + key + "' appears before any [section]");
        apply_key(cfg, section, key, value, lineno);
    }
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in.good()) throw std::runtime_error("config: cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

std::string serialize_config(const ExperimentConfig& c) {
    std::string o;
    o += "[run]\n";
    o += "seed = " + std::to_string(c.run.seed) + "\n";
    o += "out_dir = " + c.run.out_dir + "\n";
    o += "s_samples = " + std::to_string(c.run.s_samples) + "\n";
    o += "\n[data]\n";
    o += "source = " + c.data.source + "\n";
    o += "synthetic_mode = " + c.data.synthetic_mode + "\n";
    o += "length = " + std::to_string(c.data.length) + "\n";
    o += "signal_scale = " + fmt(c.data.signal_scale) + "\n";
    o += "test_offset = " + fmt(c.data.test_offset) + "\n";
    o += "csv_path = " + c.data.csv_path + "\n";
    o += "date_column = " + std::string(c.data.date_column ? "true" : "false") + "\n";
    o += "context = " + std::to_string(c.data.context) + "\n";
    o += "horizon = " + std::to_string(c.data.horizon) + "\n";
    o += "train_stride = " + std::to_string(c.data.train_stride) + "\n";
    o += "eval_stride = " + std::to_string(c.data.eval_stride) + "\n";
    o += "scaler = " + c.data.scaler + "\n";
    o += "pca = " + std::string(c.data.pca ? "true" : "false") + "\n";
    o += "\n[forecaster]\n";
    o += "type = " + c.forecaster.type + "\n";
    o += "seed = " + std::to_string(c.forecaster.seed) + "\n";
    o += "hidden = " + std::to_string(c.forecaster.hidden) + "\n";
    o += "\n[adapter]\n";
    o += "kind = " + c.adapter.kind + "\n";
    o += "d_latent = " + std::to_string(c.adapter.d_latent) + "\n";
    o += "dropout_p = " + fmt(c.adapter.dropout_p) + "\n";
    o += "hidden = " + std::to_string(c.adapter.hidden) + "\n";
    o += "layers = " + std::to_string(c.adapter.layers) + "\n";
    o += "beta = " + fmt(c.adapter.beta) + "\n";
    o += "sigma2 = " + fmt(c.adapter.sigma2) + "\n";
    o += "sigma2_auto = " + std::string(c.adapter.sigma2_auto ? "true" : "false") + "\n";
    o += "\n[training]\n";
    o += "epochs = " + std::to_string(c.training.epochs) + "\n";
    o += "batch_size = " + std::to_string(c.training.batch_size) + "\n";
    o += "lr = " + fmt(c.training.lr) + "\n";
    o += "scheduler = " + c.training.scheduler + "\n";
    o += "patience = " + std::to_string(c.training.patience) + "\n";
    o += "factor = " + fmt(c.training.factor) + "\n";
    o += "min_lr = " + fmt(c.training.min_lr) + "\n";
    o += "revin = " + std::string(c.training.revin ? "true" : "false") + "\n";
    o += "k_folds = " + std::to_string(c.training.k_folds) + "\n";
    o += "\n[experiment]\n";
    o += "n_trials = " + std::to_string(c.experiment.n_trials) + "\n";
    o += "component_sweep = " + fmt(c.experiment.component_sweep) + "\n";
    o += "beta_sweep = " + fmt(c.experiment.beta_sweep) + "\n";
    o += "log_sigma2_sweep = " + fmt(c.experiment.log_sigma2_sweep) + "\n";
    o += "include_auto = " + std::string(c.experiment.include_auto ? "true" : "false") + "\n";
    return o;
}

std::string config_hash(const ExperimentConfig& cfg) {
    const std::uint64_t h = fnv1a64(serialize_config(cfg));
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace tsadapt::cli
