#include "trifusion/checkpoint.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "trifusion/errors.hpp"

namespace trifusion {

namespace {

void write_f64_le(std::ostream& out, double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
}

double read_f64_le(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<uint64_t>(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

float read_f32_le(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    uint32_t bits = 0;
    for (int i = 0; i < 4; ++i) bits |= static_cast<uint32_t>(b[i]) << (8 * i);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

std::string format_double17(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

struct TensorRecord {
    std::string name;
    std::string dtype;
    std::vector<int> shape;
    uint64_t offset = 0;
};

}  // namespace

void save_checkpoint(const std::string& path, const RunConfig& config, const ParamSet& params,
                     const AdamW* optimizer, int64_t step, uint64_t rng_seed,
                     const double* best_val) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("save_checkpoint: cannot open " + path);

    std::vector<std::pair<std::string, const Tensor*>> tensors;
    const auto& items = params.items();
    for (const auto& p : items) tensors.emplace_back(p->name, &p->value);
    if (optimizer) {
        for (size_t i = 0; i < items.size(); ++i) {
            tensors.emplace_back(items[i]->name + ".adam_m",
                                 &const_cast<AdamW*>(optimizer)->first_moments()[i]);
            tensors.emplace_back(items[i]->name + ".adam_v",
                                 &const_cast<AdamW*>(optimizer)->second_moments()[i]);
        }
    }

    f << "TRIFUSION-CKPT 1\n";
    f << "step " << step << "\n";
    f << "rng_seed " << rng_seed << "\n";
    f << "best_val " << (best_val ? format_double17(*best_val) : "none") << "\n";
    f << "optim_step " << (optimizer ? std::to_string(optimizer->step_count()) : "none") << "\n";
    f << "[config]\n" << config_text(config);
    f << "[tensors]\n";
    uint64_t offset = 0;
    for (const auto& [name, tensor] : tensors) {
        f << name << " f64 " << tensor->rank();
        for (const int d : tensor->shape) f << " " << d;
        f << " " << offset << "\n";
        offset += tensor->numel() * 8;
    }
    f << "[payload] " << offset << "\n";
    for (const auto& [name, tensor] : tensors)
        for (const double v : tensor->data) write_f64_le(f, v);
    if (!f) throw IoError("save_checkpoint: write failed for " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("load_checkpoint: cannot open " + path);

    const auto fail = [&](const std::string& why) -> void {
        throw IoError("load_checkpoint: " + why + " in " + path);
    };

    LoadedCheckpoint ckpt;
    std::string line;
    if (!std::getline(f, line) || line != "TRIFUSION-CKPT 1") fail("bad magic/version");

    const auto read_kv = [&](const std::string& key) {
        if (!std::getline(f, line)) fail("truncated header");
        std::istringstream ls(line);
        std::string k, v;
        ls >> k >> v;
        if (k != key || v.empty()) fail("expected '" + key + "' line");
        return v;
    };

    try {
        ckpt.step = std::stoll(read_kv("step"));
        ckpt.rng_seed = std::stoull(read_kv("rng_seed"));
        const std::string bv = read_kv("best_val");
        if (bv != "none") {
            ckpt.best_val = std::stod(bv);
            ckpt.has_best_val = true;
        }
        const std::string os = read_kv("optim_step");
        if (os != "none") {
            ckpt.optim_step = std::stoll(os);
            ckpt.has_optim = true;
        }
    } catch (const IoError&) {
        throw;
    } catch (const std::exception&) {
        fail("malformed header value");
    }

    if (!std::getline(f, line) || line != "[config]") fail("missing [config]");
    std::ostringstream cfg_text;
    while (std::getline(f, line)) {
        if (line == "[tensors]") break;
        cfg_text << line << "\n";
    }
    if (line != "[tensors]") fail("missing [tensors]");
    try {
        ckpt.config = parse_config_text(cfg_text.str());
    } catch (const ConfigError& e) {
        fail(std::string("invalid embedded config: ") + e.what());
    }

    std::vector<TensorRecord> records;
    uint64_t payload_bytes = 0;
    while (std::getline(f, line)) {
        if (line.rfind("[payload]", 0) == 0) {
            std::istringstream ls(line);
            std::string tag;
            ls >> tag >> payload_bytes;
            break;
        }
        std::istringstream ls(line);
        TensorRecord r;
        int rank = -1;
        ls >> r.name >> r.dtype >> rank;
        if (r.name.empty() || (r.dtype != "f64" && r.dtype != "f32") || rank < 0)
            fail("malformed tensor record '" + line + "'");
        r.shape.resize(rank);
        for (int i = 0; i < rank; ++i)
            if (!(ls >> r.shape[i]) || r.shape[i] < 1) fail("bad extents in '" + line + "'");
        if (!(ls >> r.offset)) fail("missing offset in '" + line + "'");
        records.push_back(std::move(r));
    }
    if (line.rfind("[payload]", 0) != 0) fail("missing [payload]");

    uint64_t expected = 0;
    for (const auto& r : records) {
        if (r.offset != expected) fail("non-contiguous tensor offsets");
        expected += shape_numel(r.shape) * (r.dtype == "f64" ? 8 : 4);
    }
    if (expected != payload_bytes) fail("payload size mismatch");

    for (const auto& r : records) {
        Tensor t(r.shape);
        if (r.dtype == "f64")
            for (double& v : t.data) v = read_f64_le(f);
        else
            for (double& v : t.data) v = static_cast<double>(read_f32_le(f));
        if (!f) fail("truncated payload");
        if (ckpt.tensors.count(r.name)) fail("duplicate tensor '" + r.name + "'");
        ckpt.tensors.emplace(r.name, std::move(t));
    }
    return ckpt;
}

void restore_params(const LoadedCheckpoint& ckpt, ParamSet& params, AdamW* optimizer) {
    const auto& items = params.items();
    for (size_t i = 0; i < items.size(); ++i) {
        Param& p = *items[i];
        const auto it = ckpt.tensors.find(p.name);
        if (it == ckpt.tensors.end())
            throw IoError("restore_params: checkpoint missing tensor " + p.name);
        if (it->second.shape != p.value.shape)
            throw IoError("restore_params: shape mismatch for " + p.name);
        p.value = it->second;
        if (optimizer) {
            for (const bool first : {true, false}) {
                const std::string name = p.name + (first ? ".adam_m" : ".adam_v");
                const auto mit = ckpt.tensors.find(name);
                if (mit == ckpt.tensors.end())
                    throw IoError("restore_params: checkpoint missing tensor " + name);
                if (mit->second.shape != p.value.shape)
                    throw IoError("restore_params: shape mismatch for " + name);
                (first ? optimizer->first_moments() : optimizer->second_moments())[i] = mit->second;
            }
        }
    }
    if (optimizer) {
        if (!ckpt.has_optim) throw IoError("restore_params: checkpoint has no optimizer state");
        optimizer->set_step_count(ckpt.optim_step);
    }
    // Reject names that belong to neither the parameters nor their moments.
    for (const auto& [name, tensor] : ckpt.tensors) {
        std::string base = name;
        for (const char* suffix : {".adam_m", ".adam_v"}) {
            const size_t sl = std::strlen(suffix);
            if (base.size() > sl && base.compare(base.size() - sl, sl, suffix) == 0)
                base = base.substr(0, base.size() - sl);
        }
        if (!params.find(base))
            throw IoError("restore_params: unexpected tensor " + name + " in checkpoint");
    }
}

}  // namespace trifusion
