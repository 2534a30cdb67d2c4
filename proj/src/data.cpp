#include "trifusion/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "trifusion/errors.hpp"

namespace trifusion::data {

void validate_phantom_spec(const PhantomSpec& spec) {
    if (spec.size < 8 || (spec.size & (spec.size - 1)) != 0)
        throw ConfigError("phantom: size must be a power of two >= 8");
    if (spec.ellipses_min < 1 || spec.ellipses_max < spec.ellipses_min)
        throw ConfigError("phantom: invalid ellipse count range");
    if (spec.blobs_min < 1 || spec.blobs_max < spec.blobs_min)
        throw ConfigError("phantom: invalid blob count range");
    if (!(spec.blob_sigma_min > 0.0 && spec.blob_sigma_max > spec.blob_sigma_min))
        throw ConfigError("phantom: invalid blob sigma range");
    if (spec.texture_amp < 0.0 || spec.blur_sigma <= 0.0)
        throw ConfigError("phantom: invalid texture/blur settings");
    if (spec.functional_channels != 1 && spec.functional_channels != 3)
        throw ConfigError("phantom: functional_channels must be 1 or 3");
}

namespace {

struct Ellipse {
    double cy, cx, ry, rx, angle, intensity;
    bool contains(double y, double x) const {
        const double dy = y - cy, dx = x - cx;
        const double ca = std::cos(angle), sa = std::sin(angle);
        const double u = (ca * dx + sa * dy) / rx;
        const double v = (-sa * dx + ca * dy) / ry;
        return u * u + v * v <= 1.0;
    }
};

Tensor gaussian_blur(const Tensor& image, double sigma) {
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> kernel(2 * radius + 1);
    double norm = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
        norm += kernel[i + radius];
    }
    for (double& k : kernel) k /= norm;

    const int c = image.channels(), h = image.height(), w = image.width();
    Tensor tmp({c, h, w}), out({c, h, w});
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i)
                    acc += kernel[i + radius] * image.at(ch, y, resample::reflect_index(x + i, w));
                tmp.at(ch, y, x) = acc;
            }
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i)
                    acc += kernel[i + radius] * tmp.at(ch, resample::reflect_index(y + i, h), x);
                out.at(ch, y, x) = acc;
            }
    return out;
}

}  // namespace

Phantom generate_phantom(const PhantomSpec& spec, uint64_t seed) {
    validate_phantom_spec(spec);
    const int s = spec.size;
    Rng rng(Rng::mix(seed ^ 0x7068616e746f6dULL));  // independent of caller streams

    const int n_ellipses = static_cast<int>(rng.uniform_int(spec.ellipses_min, spec.ellipses_max));
    std::vector<Ellipse> ellipses;
    for (int i = 0; i < n_ellipses; ++i) {
        Ellipse e;
        e.cy = rng.uniform(0.25, 0.75) * s;
        e.cx = rng.uniform(0.25, 0.75) * s;
        e.ry = rng.uniform(0.10, 0.35) * s;
        e.rx = rng.uniform(0.10, 0.35) * s;
        e.angle = rng.uniform(0.0, 3.14159265358979323846);
        e.intensity = rng.uniform(0.35, 0.95);
        ellipses.push_back(e);
    }

    Tensor base({1, s, s});
    Tensor support({1, s, s});
    for (int y = 0; y < s; ++y)
        for (int x = 0; x < s; ++x) {
            double v = 0.0;
            for (const Ellipse& e : ellipses)
                if (e.contains(y + 0.5, x + 0.5)) v = std::max(v, e.intensity);
            base.at(0, y, x) = v;
            support.at(0, y, x) = v > 0.0 ? 1.0 : 0.0;
        }

    // Anatomical A: ellipse stack plus texture inside the support.
    Phantom out;
    out.anatomical_a = Tensor({1, s, s});
    for (int i = 0; i < s * s; ++i) {
        const double noise = spec.texture_amp * rng.uniform(-1.0, 1.0);
        out.anatomical_a[i] = support[i] > 0.0 ? base[i] + noise : 0.0;
    }
    out.anatomical_a.clamp(0.0, 1.0);

    // Anatomical B: fixed monotone contrast remap of the ellipse stack
    // (registered with A) plus independent texture.
    out.anatomical_b = Tensor({1, s, s});
    for (int i = 0; i < s * s; ++i) {
        const double remapped = 0.15 + 0.75 * (1.0 - base[i]);
        const double noise = spec.texture_amp * rng.uniform(-1.0, 1.0);
        out.anatomical_b[i] = support[i] > 0.0 ? remapped + noise : 0.0;
    }
    out.anatomical_b.clamp(0.0, 1.0);

    // Functional: smooth blobs centered inside the support, then blurred.
    // Peak normalization (no hard clamp) keeps the field free of kinks, so
    // its detail-band energy stays far below the textured anatomy at any
    // seed.
    const int n_blobs = static_cast<int>(rng.uniform_int(spec.blobs_min, spec.blobs_max));
    Tensor blob_map({1, s, s});
    for (int b = 0; b < n_blobs; ++b) {
        double cy = 0.5 * s, cx = 0.5 * s;
        for (int attempt = 0; attempt < 64; ++attempt) {
            const double ty = rng.uniform(0.1, 0.9) * s;
            const double tx = rng.uniform(0.1, 0.9) * s;
            if (support.at(0, std::min(s - 1, static_cast<int>(ty)),
                           std::min(s - 1, static_cast<int>(tx))) > 0.0) {
                cy = ty;
                cx = tx;
                break;
            }
        }
        const double sigma = rng.uniform(spec.blob_sigma_min, spec.blob_sigma_max) * s;
        const double amp = rng.uniform(0.55, 1.0);
        for (int y = 0; y < s; ++y)
            for (int x = 0; x < s; ++x) {
                const double d2 = (y + 0.5 - cy) * (y + 0.5 - cy) + (x + 0.5 - cx) * (x + 0.5 - cx);
                blob_map.at(0, y, x) += amp * std::exp(-0.5 * d2 / (sigma * sigma));
            }
    }
    blob_map = gaussian_blur(blob_map, spec.blur_sigma);
    const double peak = blob_map.max();
    if (peak > 1.0) blob_map *= 0.98 / peak;
    blob_map.clamp(0.0, 1.0);

    if (spec.functional_channels == 1) {
        out.functional = std::move(blob_map);
    } else {
        out.functional = Tensor({3, s, s});
        for (int y = 0; y < s; ++y)
            for (int x = 0; x < s; ++x) {
                const auto rgb = fuse_colormap(blob_map.at(0, y, x));
                for (int c = 0; c < 3; ++c) out.functional.at(c, y, x) = rgb[c];
            }
    }
    return out;
}

std::array<double, 3> fuse_colormap(double v) {
    const auto clamp01 = [](double x) { return std::min(1.0, std::max(0.0, x)); };
    return {clamp01(3.0 * v), clamp01(3.0 * v - 1.0), clamp01(3.0 * v - 2.0)};
}

Tensor fuse_ground_truth(const Tensor& anatomical_a, const Tensor& anatomical_b,
                         const Tensor& functional) {
    require_same_shape(anatomical_a, anatomical_b, "fuse_ground_truth");
    require_rank3(functional, "fuse_ground_truth");
    if (functional.height() != anatomical_a.height() || functional.width() != anatomical_a.width())
        throw ShapeError("fuse_ground_truth: functional extents differ from anatomy");

    const int h = anatomical_a.height(), w = anatomical_a.width();
    const int fc = functional.channels();
    Tensor out({3, h, w});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double lum = std::max(anatomical_a.at(0, y, x), anatomical_b.at(0, y, x));
            double v = 0.0;
            for (int c = 0; c < fc; ++c) v += functional.at(c, y, x);
            v /= fc;
            const auto rgb = fuse_colormap(v);
            for (int c = 0; c < 3; ++c) {
                const double val = (1.0 - v) * lum + v * rgb[c];
                out.at(c, y, x) = std::min(1.0, std::max(0.0, val));
            }
        }
    return out;
}

cond::ModalityTriplet degrade(const Phantom& hr, int scale) {
    if (scale != 2 && scale != 4 && scale != 8) throw ValueError("degrade: scale must be 2, 4 or 8");
    const int h = hr.anatomical_a.height(), w = hr.anatomical_a.width();
    if (h % scale != 0 || w % scale != 0)
        throw ShapeError("degrade: extents not divisible by scale");
    cond::ModalityTriplet lr;
    lr.scale = scale;
    lr.x = resample::bicubic_resize(hr.anatomical_a, h / scale, w / scale);
    lr.y = resample::bicubic_resize(hr.anatomical_b, h / scale, w / scale);
    lr.s = resample::bicubic_resize(hr.functional, h / scale, w / scale);
    lr.x.clamp(0.0, 1.0);
    lr.y.clamp(0.0, 1.0);
    lr.s.clamp(0.0, 1.0);
    return lr;
}

TriModalSample make_sample(const PhantomSpec& spec, uint64_t seed, int scale) {
    Phantom hr = generate_phantom(spec, seed);
    TriModalSample sample;
    sample.scale = scale;
    sample.target = fuse_ground_truth(hr.anatomical_a, hr.anatomical_b, hr.functional);
    sample.lr = degrade(hr, scale);
    sample.hr_a = std::move(hr.anatomical_a);
    sample.hr_b = std::move(hr.anatomical_b);
    sample.hr_f = std::move(hr.functional);
    return sample;
}

void write_image(const std::string& path, const Tensor& image) {
    require_rank3(image, "write_image");
    const int c = image.channels();
    if (c != 1 && c != 3) throw ValueError("write_image: channel count must be 1 or 3");
    if (image.min() < 0.0 || image.max() > 1.0)
        throw ValueError("write_image: values must be in [0,1]");

    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("write_image: cannot open " + path);
    f << (c == 1 ? "P5" : "P6") << "\n" << image.width() << " " << image.height() << "\n255\n";
    const int h = image.height(), w = image.width();
    std::vector<unsigned char> row(static_cast<size_t>(w) * c);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x)
            for (int ch = 0; ch < c; ++ch)
                row[static_cast<size_t>(x) * c + ch] =
                    static_cast<unsigned char>(std::lround(255.0 * image.at(ch, y, x)));
        f.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
    if (!f) throw IoError("write_image: write failed for " + path);
}

namespace {

// Reads one whitespace-delimited header token, skipping '#' comments.
std::string next_header_token(std::istream& in) {
    std::string tok;
    int ch;
    while ((ch = in.get()) != EOF) {
        if (ch == '#') {
            while ((ch = in.get()) != EOF && ch != '\n') {}
            continue;
        }
        if (std::isspace(ch)) {
            if (!tok.empty()) return tok;
            continue;
        }
        tok.push_back(static_cast<char>(ch));
    }
    return tok;
}

}  // namespace

Tensor read_image(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("read_image: cannot open " + path);

    const std::string magic = next_header_token(f);
    int channels;
    if (magic == "P5")
        channels = 1;
    else if (magic == "P6")
        channels = 3;
    else
        throw IoError("read_image: bad magic '" + magic + "' in " + path);

    int w = 0, h = 0, maxval = 0;
    try {
        w = std::stoi(next_header_token(f));
        h = std::stoi(next_header_token(f));
        maxval = std::stoi(next_header_token(f));
    } catch (const std::exception&) {
        throw IoError("read_image: malformed header in " + path);
    }
    if (w < 1 || h < 1) throw IoError("read_image: bad extents in " + path);
    if (maxval != 255) throw IoError("read_image: maxval must be 255 in " + path);

    // A single whitespace byte separates the header from the payload.
    std::vector<unsigned char> payload(static_cast<size_t>(w) * h * channels);
    f.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
    if (f.gcount() != static_cast<std::streamsize>(payload.size()))
        throw IoError("read_image: truncated payload in " + path);

    Tensor out({channels, h, w});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < channels; ++c)
                out.at(c, y, x) =
                    payload[(static_cast<size_t>(y) * w + x) * channels + c] / 255.0;
    return out;
}

DatasetManifest make_split(const std::vector<std::string>& paths,
                           const std::array<double, 3>& fractions, uint64_t seed) {
    const int n = static_cast<int>(paths.size());
    const double fsum = fractions[0] + fractions[1] + fractions[2];
    if (std::fabs(fsum - 1.0) > 1e-9) throw ConfigError("make_split: fractions must sum to 1");

    int n_train = static_cast<int>(std::lround(fractions[0] * n));
    const int n_val = static_cast<int>(std::lround(fractions[1] * n));
    const int n_test = static_cast<int>(std::lround(fractions[2] * n));
    n_train += n - (n_train + n_val + n_test);  // remainder to train
    if (n_train < 1 || n_val < 1 || n_test < 1)
        throw ConfigError("make_split: a split is empty; need more samples");

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(Rng::mix(seed ^ 0x73706c6974ULL));
    for (int i = n - 1; i > 0; --i) {
        const int j = static_cast<int>(rng.uniform_int(0, i));
        std::swap(order[i], order[j]);
    }

    DatasetManifest manifest;
    manifest.seed = seed;
    manifest.entries.resize(n);
    for (int i = 0; i < n; ++i) {
        const char* split = i < n_train ? "train" : (i < n_train + n_val ? "val" : "test");
        manifest.entries[order[i]] = SplitEntry{paths[order[i]], split};
    }
    return manifest;
}

void write_manifest(const std::string& path, const DatasetManifest& manifest) {
    std::ofstream f(path);
    if (!f) throw IoError("write_manifest: cannot open " + path);
    f << "# split_seed=" << manifest.seed << "\n";
    for (const auto& e : manifest.entries) f << e.path << " " << e.split << "\n";
    if (!f) throw IoError("write_manifest: write failed for " + path);
}

DatasetManifest read_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("read_manifest: cannot open " + path);
    DatasetManifest manifest;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto pos = line.find("split_seed=");
            if (pos != std::string::npos)
                manifest.seed = std::stoull(line.substr(pos + 11));
            continue;
        }
        std::istringstream ls(line);
        SplitEntry e;
        if (!(ls >> e.path >> e.split) || (e.split != "train" && e.split != "val" && e.split != "test"))
            throw IoError("read_manifest: malformed line '" + line + "'");
        manifest.entries.push_back(std::move(e));
    }
    return manifest;
}

}  // namespace trifusion::data
