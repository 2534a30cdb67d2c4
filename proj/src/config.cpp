#include "trifusion/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "trifusion/errors.hpp"

namespace trifusion {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string format_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

struct Field {
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

template <typename T>
T parse_number(const std::string& key, const std::string& value);

template <>
int parse_number<int>(const std::string& key, const std::string& value) {
    size_t pos = 0;
    int v;
    try {
        v = std::stoi(value, &pos);
    } catch (const std::exception&) {
        throw ConfigError("config: invalid integer for " + key + ": '" + value + "'");
    }
    if (pos != value.size()) throw ConfigError("config: trailing junk for " + key);
    return v;
}

template <>
uint64_t parse_number<uint64_t>(const std::string& key, const std::string& value) {
    size_t pos = 0;
    uint64_t v;
    try {
        v = std::stoull(value, &pos);
    } catch (const std::exception&) {
        throw ConfigError("config: invalid unsigned for " + key + ": '" + value + "'");
    }
    if (pos != value.size()) throw ConfigError("config: trailing junk for " + key);
    return v;
}

template <>
double parse_number<double>(const std::string& key, const std::string& value) {
    size_t pos = 0;
    double v;
    try {
        v = std::stod(value, &pos);
    } catch (const std::exception&) {
        throw ConfigError("config: invalid number for " + key + ": '" + value + "'");
    }
    if (pos != value.size()) throw ConfigError("config: trailing junk for " + key);
    return v;
}

const std::map<std::string, Field>& fields() {
    static const std::map<std::string, Field> table = [] {
        std::map<std::string, Field> t;
        const auto add_int = [&](const std::string& key, int RunConfig::* member) {
            t[key] = {[key, member](RunConfig& c, const std::string& v) {
                          c.*member = parse_number<int>(key, v);
                      },
                      [member](const RunConfig& c) { return std::to_string(c.*member); }};
        };
        const auto add_double = [&](const std::string& key, double RunConfig::* member) {
            t[key] = {[key, member](RunConfig& c, const std::string& v) {
                          c.*member = parse_number<double>(key, v);
                      },
                      [member](const RunConfig& c) { return format_double(c.*member); }};
        };
        const auto add_string = [&](const std::string& key, std::string RunConfig::* member) {
            t[key] = {[](RunConfig&, const std::string&) {}, nullptr};
            t[key] = {[member](RunConfig& c, const std::string& v) { c.*member = v; },
                      [member](const RunConfig& c) { return c.*member; }};
        };

        add_int("scale", &RunConfig::scale);
        add_int("hr_size", &RunConfig::hr_size);
        add_int("functional_channels", &RunConfig::functional_channels);
        add_int("timesteps", &RunConfig::timesteps);
        add_double("beta_start", &RunConfig::beta_start);
        add_double("beta_end", &RunConfig::beta_end);
        t["loss"] = {[](RunConfig& c, const std::string& v) {
                         if (v == "l2")
                             c.loss = diffusion::LossKind::l2;
                         else if (v == "l1")
                             c.loss = diffusion::LossKind::l1;
                         else
                             throw ConfigError("config: loss must be l2 or l1, got '" + v + "'");
                     },
                     [](const RunConfig& c) {
                         return c.loss == diffusion::LossKind::l2 ? "l2" : "l1";
                     }};
        t["variance"] = {[](RunConfig& c, const std::string& v) {
                             if (v == "beta")
                                 c.variance = diffusion::VarianceMode::beta;
                             else if (v == "posterior")
                                 c.variance = diffusion::VarianceMode::posterior;
                             else
                                 throw ConfigError("config: variance must be beta or posterior");
                         },
                         [](const RunConfig& c) {
                             return c.variance == diffusion::VarianceMode::beta ? "beta"
                                                                                : "posterior";
                         }};
        add_int("wavelet_levels", &RunConfig::wavelet_levels);
        add_int("cond_channels", &RunConfig::cond_channels);
        add_int("cond_width", &RunConfig::cond_width);
        add_int("attention_reduction", &RunConfig::attention_reduction);
        t["conditioning"] = {[](RunConfig& c, const std::string& v) {
                                 if (v == "full")
                                     c.conditioning = CondMode::full;
                                 else if (v == "pixel")
                                     c.conditioning = CondMode::pixel;
                                 else
                                     throw ConfigError("config: conditioning must be full or pixel");
                             },
                             [](const RunConfig& c) {
                                 return c.conditioning == CondMode::full ? "full" : "pixel";
                             }};
        add_int("unet_depth", &RunConfig::unet_depth);
        add_int("unet_width", &RunConfig::unet_width);
        add_int("embed_dim", &RunConfig::embed_dim);
        add_double("lr", &RunConfig::lr);
        add_double("adam_beta1", &RunConfig::adam_beta1);
        add_double("adam_beta2", &RunConfig::adam_beta2);
        add_double("adam_eps", &RunConfig::adam_eps);
        add_double("weight_decay", &RunConfig::weight_decay);
        add_int("batch_size", &RunConfig::batch_size);
        add_int("train_steps", &RunConfig::train_steps);
        add_int("val_interval", &RunConfig::val_interval);
        add_int("checkpoint_interval", &RunConfig::checkpoint_interval);
        add_int("threads", &RunConfig::threads);
        t["seed"] = {[](RunConfig& c, const std::string& v) {
                         c.seed = parse_number<uint64_t>("seed", v);
                     },
                     [](const RunConfig& c) { return std::to_string(c.seed); }};
        add_int("n_samples", &RunConfig::n_samples);
        add_double("split_train", &RunConfig::split_train);
        add_double("split_val", &RunConfig::split_val);
        add_double("split_test", &RunConfig::split_test);
        add_int("phantom_ellipses_min", &RunConfig::phantom_ellipses_min);
        add_int("phantom_ellipses_max", &RunConfig::phantom_ellipses_max);
        add_double("phantom_texture_amp", &RunConfig::phantom_texture_amp);
        add_int("phantom_blobs_min", &RunConfig::phantom_blobs_min);
        add_int("phantom_blobs_max", &RunConfig::phantom_blobs_max);
        add_double("phantom_blob_sigma_min", &RunConfig::phantom_blob_sigma_min);
        add_double("phantom_blob_sigma_max", &RunConfig::phantom_blob_sigma_max);
        add_double("phantom_blur_sigma", &RunConfig::phantom_blur_sigma);
        add_string("data_dir", &RunConfig::data_dir);
        add_string("checkpoint_dir", &RunConfig::checkpoint_dir);
        add_string("report_dir", &RunConfig::report_dir);
        return t;
    }();
    return table;
}

}  // namespace

data::PhantomSpec RunConfig::phantom_spec() const {
    data::PhantomSpec spec;
    spec.size = hr_size;
    spec.ellipses_min = phantom_ellipses_min;
    spec.ellipses_max = phantom_ellipses_max;
    spec.texture_amp = phantom_texture_amp;
    spec.blobs_min = phantom_blobs_min;
    spec.blobs_max = phantom_blobs_max;
    spec.blob_sigma_min = phantom_blob_sigma_min;
    spec.blob_sigma_max = phantom_blob_sigma_max;
    spec.blur_sigma = phantom_blur_sigma;
    spec.functional_channels = functional_channels;
    return spec;
}

void RunConfig::validate() const {
    if (scale != 2 && scale != 4 && scale != 8)
        throw ConfigError("config: scale must be one of {2,4,8}");
    if (hr_size < 8 || (hr_size & (hr_size - 1)) != 0)
        throw ConfigError("config: hr_size must be a power of two >= 8");
    if (hr_size % scale != 0) throw ConfigError("config: hr_size must be divisible by scale");
    if (functional_channels != 1 && functional_channels != 3)
        throw ConfigError("config: functional_channels must be 1 or 3");
    if (timesteps < 1) throw ConfigError("config: timesteps must be >= 1");
    if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0))
        throw ConfigError("config: need 0 < beta_start <= beta_end < 1");
    if (wavelet_levels < 1) throw ConfigError("config: wavelet_levels must be >= 1");
    if ((hr_size >> wavelet_levels) << wavelet_levels != hr_size)
        throw ConfigError("config: hr_size must divide 2^wavelet_levels");
    if (cond_channels < 1 || cond_width < 1) throw ConfigError("config: invalid conditioning widths");
    if (attention_reduction < 1) throw ConfigError("config: attention_reduction must be >= 1");
    if (unet_depth < 1 || unet_width < 1) throw ConfigError("config: invalid unet shape");
    if (embed_dim < 2 || embed_dim % 2 != 0)
        throw ConfigError("config: embed_dim must be even and >= 2");
    if (hr_size % (1 << unet_depth) != 0)
        throw ConfigError("config: hr_size must divide 2^unet_depth");
    if (lr <= 0.0) throw ConfigError("config: lr must be positive");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0))
        throw ConfigError("config: adam betas must be in [0,1)");
    if (adam_eps <= 0.0) throw ConfigError("config: adam_eps must be positive");
    if (weight_decay < 0.0) throw ConfigError("config: weight_decay must be >= 0");
    if (batch_size < 1 || train_steps < 0) throw ConfigError("config: invalid training sizes");
    if (val_interval < 1 || checkpoint_interval < 1)
        throw ConfigError("config: intervals must be >= 1");
    if (threads < 1) throw ConfigError("config: threads must be >= 1");
    if (n_samples < 3) throw ConfigError("config: n_samples must be >= 3");
    if (std::fabs(split_train + split_val + split_test - 1.0) > 1e-9)
        throw ConfigError("config: split fractions must sum to 1");
    data::PhantomSpec spec = phantom_spec();
    data::validate_phantom_spec(spec);
    if (data_dir.empty() || checkpoint_dir.empty() || report_dir.empty())
        throw ConfigError("config: directories must be non-empty");
}

RunConfig parse_config_text(const std::string& text) {
    RunConfig config;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    std::vector<std::string> seen;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: line " + std::to_string(lineno) + " is not key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const auto it = fields().find(key);
        if (it == fields().end()) throw ConfigError("config: unknown key '" + key + "'");
        for (const auto& s : seen)
            if (s == key) throw ConfigError("config: duplicate key '" + key + "'");
        seen.push_back(key);
        it->second.set(config, value);
    }
    config.validate();
    return config;
}

std::string config_text(const RunConfig& config) {
    std::ostringstream os;
    for (const auto& [key, field] : fields()) os << key << " = " << field.get(config) << "\n";
    return os.str();
}

RunConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("load_config: cannot open " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    return parse_config_text(buf.str());
}

void save_config(const RunConfig& config, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IoError("save_config: cannot open " + path);
    f << config_text(config);
    if (!f) throw IoError("save_config: write failed for " + path);
}

}  // namespace trifusion
