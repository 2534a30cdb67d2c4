#include "trifusion/wavelet.hpp"

#include <cmath>
#include <sstream>

#include "trifusion/errors.hpp"

namespace trifusion::wavelet {

namespace {

void require_even_extents(const Tensor& image, const char* what) {
    require_rank3(image, what);
    if (image.height() % 2 != 0 || image.width() % 2 != 0)
        throw ShapeError(std::string(what) + ": extents must be even, got " + shape_str(image.shape));
}

}  // namespace

SubbandSet dwt2(const Tensor& image) {
    require_even_extents(image, "dwt2");
    const int c = image.channels(), h2 = image.height() / 2, w2 = image.width() / 2;
    SubbandSet out{Tensor({c, h2, w2}), Tensor({c, h2, w2}), Tensor({c, h2, w2}),
                   Tensor({c, h2, w2})};
    for (int ch = 0; ch < c; ++ch) {
        for (int y = 0; y < h2; ++y) {
            for (int x = 0; x < w2; ++x) {
                const double a = image.at(ch, 2 * y, 2 * x);
                const double b = image.at(ch, 2 * y, 2 * x + 1);
                const double cc = image.at(ch, 2 * y + 1, 2 * x);
                const double d = image.at(ch, 2 * y + 1, 2 * x + 1);
                out.ll.at(ch, y, x) = 0.5 * (a + b + cc + d);
                out.h.at(ch, y, x) = 0.5 * (a - b + cc - d);
                out.v.at(ch, y, x) = 0.5 * (a + b - cc - d);
                out.d.at(ch, y, x) = 0.5 * (a - b - cc + d);
            }
        }
    }
    return out;
}

Tensor idwt2(const SubbandSet& bands) {
    require_same_shape(bands.ll, bands.v, "idwt2");
    require_same_shape(bands.ll, bands.h, "idwt2");
    require_same_shape(bands.ll, bands.d, "idwt2");
    require_rank3(bands.ll, "idwt2");
    const int c = bands.ll.channels(), h2 = bands.ll.height(), w2 = bands.ll.width();
    Tensor out({c, 2 * h2, 2 * w2});
    for (int ch = 0; ch < c; ++ch) {
        for (int y = 0; y < h2; ++y) {
            for (int x = 0; x < w2; ++x) {
                const double ll = bands.ll.at(ch, y, x);
                const double hh = bands.h.at(ch, y, x);
                const double vv = bands.v.at(ch, y, x);
                const double dd = bands.d.at(ch, y, x);
                out.at(ch, 2 * y, 2 * x) = 0.5 * (ll + hh + vv + dd);
                out.at(ch, 2 * y, 2 * x + 1) = 0.5 * (ll - hh + vv - dd);
                out.at(ch, 2 * y + 1, 2 * x) = 0.5 * (ll + hh - vv - dd);
                out.at(ch, 2 * y + 1, 2 * x + 1) = 0.5 * (ll - hh - vv + dd);
            }
        }
    }
    return out;
}

WaveletPyramid dwt_multi(const Tensor& image, int levels) {
    require_rank3(image, "dwt_multi");
    if (levels < 1) throw ValueError("dwt_multi: levels must be >= 1");
    const int div = 1 << levels;
    if (image.height() % div != 0 || image.width() % div != 0)
        throw ShapeError("dwt_multi: extents " + shape_str(image.shape) + " not divisible by 2^" +
                         std::to_string(levels));
    WaveletPyramid pyr;
    pyr.depth = levels;
    Tensor current = image;
    for (int j = 0; j < levels; ++j) {
        SubbandSet bands = dwt2(current);
        pyr.levels.push_back({std::move(bands.v), std::move(bands.h), std::move(bands.d)});
        current = std::move(bands.ll);
    }
    pyr.top_ll = std::move(current);
    return pyr;
}

Tensor idwt_multi(const WaveletPyramid& pyramid) {
    if (pyramid.depth < 1 || static_cast<int>(pyramid.levels.size()) != pyramid.depth)
        throw ValueError("idwt_multi: invalid pyramid depth");
    Tensor current = pyramid.top_ll;
    for (int j = pyramid.depth - 1; j >= 0; --j) {
        const auto& [v, h, d] = pyramid.levels[j];
        require_same_shape(current, v, "idwt_multi");
        SubbandSet bands{std::move(current), v, h, d};
        current = idwt2(bands);
    }
    return current;
}

SpectrumTensor pack_spectrum(const WaveletPyramid& pyramid) {
    if (pyramid.depth < 1) throw ValueError("pack_spectrum: invalid pyramid");
    const int levels = pyramid.depth;
    const int c = pyramid.top_ll.channels();
    const int h1 = pyramid.levels[0][0].height(), w1 = pyramid.levels[0][0].width();

    SpectrumTensor out;
    out.manifest = SpectrumManifest{levels, c, 2 * h1, 2 * w1};
    out.data = Tensor({out.manifest.packed_channels(), h1, w1});

    // Replicate a native level-j band onto the level-1 grid.
    const auto put_band = [&](const Tensor& band, int level, int band_base) {
        const int rep = 1 << (level - 1);
        for (int ch = 0; ch < c; ++ch)
            for (int y = 0; y < h1; ++y)
                for (int x = 0; x < w1; ++x)
                    out.data.at(band_base + ch, y, x) = band.at(ch, y / rep, x / rep);
    };

    int base = 0;
    put_band(pyramid.top_ll, levels, base);
    base += c;
    for (int j = levels; j >= 1; --j) {
        for (int b = 0; b < 3; ++b) {
            put_band(pyramid.levels[j - 1][b], j, base);
            base += c;
        }
    }
    return out;
}

namespace {

// Visits each packed band slot in manifest order: (band index in pyramid
// terms, level, channel base in the packed tensor).
template <typename Fn>
void for_each_band(const SpectrumManifest& m, Fn&& fn) {
    int base = 0;
    fn(-1, m.levels, base);  // top LL
    base += m.channels;
    for (int j = m.levels; j >= 1; --j) {
        for (int b = 0; b < 3; ++b) {
            fn(b, j, base);
            base += m.channels;
        }
    }
}

void check_manifest(const SpectrumTensor& s, const char* what) {
    const auto& m = s.manifest;
    if (m.levels < 1 || m.channels < 1 || m.src_h % 2 != 0 || m.src_w % 2 != 0)
        throw ValueError(std::string(what) + ": invalid manifest");
    const std::vector<int> expect{m.packed_channels(), m.src_h / 2, m.src_w / 2};
    require_shape(s.data, expect, what);
    if ((m.src_h >> m.levels) << m.levels != m.src_h || (m.src_w >> m.levels) << m.levels != m.src_w)
        throw ValueError(std::string(what) + ": source extents not divisible by 2^levels");
}

}  // namespace

WaveletPyramid unpack_spectrum(const SpectrumTensor& spectrum) {
    check_manifest(spectrum, "unpack_spectrum");
    const auto& m = spectrum.manifest;
    WaveletPyramid pyr;
    pyr.depth = m.levels;
    pyr.levels.resize(m.levels);

    const auto take_band = [&](int level, int base) {
        const int rep = 1 << (level - 1);
        const int bh = m.src_h >> level, bw = m.src_w >> level;
        Tensor band({m.channels, bh, bw});
        for (int ch = 0; ch < m.channels; ++ch)
            for (int y = 0; y < bh; ++y)
                for (int x = 0; x < bw; ++x)
                    band.at(ch, y, x) = spectrum.data.at(base + ch, y * rep, x * rep);
        return band;
    };

    for_each_band(m, [&](int band, int level, int base) {
        if (band < 0)
            pyr.top_ll = take_band(level, base);
        else
            pyr.levels[level - 1][band] = take_band(level, base);
    });
    return pyr;
}

WaveletPyramid pack_spectrum_transpose(const SpectrumTensor& cotangent) {
    check_manifest(cotangent, "pack_spectrum_transpose");
    const auto& m = cotangent.manifest;
    WaveletPyramid pyr;
    pyr.depth = m.levels;
    pyr.levels.resize(m.levels);

    const auto sum_band = [&](int level, int base) {
        const int rep = 1 << (level - 1);
        const int bh = m.src_h >> level, bw = m.src_w >> level;
        const int h1 = m.src_h / 2, w1 = m.src_w / 2;
        Tensor band({m.channels, bh, bw});
        for (int ch = 0; ch < m.channels; ++ch)
            for (int y = 0; y < h1; ++y)
                for (int x = 0; x < w1; ++x)
                    band.at(ch, y / rep, x / rep) += cotangent.data.at(base + ch, y, x);
        return band;
    };

    for_each_band(m, [&](int band, int level, int base) {
        if (band < 0)
            pyr.top_ll = sum_band(level, base);
        else
            pyr.levels[level - 1][band] = sum_band(level, base);
    });
    return pyr;
}

EnergyTable subband_energy(const WaveletPyramid& pyramid) {
    if (pyramid.depth < 1) throw ValueError("subband_energy: invalid pyramid");
    EnergyTable table;
    double detail_energy = 0.0, total_energy = 0.0;

    const auto band_stats = [](const Tensor& band) {
        double sq = 0.0;
        for (const double v : band.data) sq += v * v;
        return sq;
    };

    const double ll_sq = band_stats(pyramid.top_ll);
    total_energy += ll_sq;
    table.bands.push_back(
        {"LL", pyramid.depth, ll_sq / static_cast<double>(pyramid.top_ll.numel())});

    static const char* names[3] = {"V", "H", "D"};
    for (int j = pyramid.depth; j >= 1; --j) {
        for (int b = 0; b < 3; ++b) {
            const Tensor& band = pyramid.levels[j - 1][b];
            const double sq = band_stats(band);
            detail_energy += sq;
            total_energy += sq;
            table.bands.push_back({names[b], j, sq / static_cast<double>(band.numel())});
        }
    }
    table.hf_fraction = total_energy > 0.0 ? detail_energy / total_energy : 0.0;
    return table;
}

std::string energy_table_csv(const EnergyTable& table) {
    std::ostringstream os;
    os.precision(17);
    os << "band,level,mean_sq_coeff\n";
    for (const auto& b : table.bands) os << b.band << "," << b.level << "," << b.mean_sq << "\n";
    os << "hf_fraction,," << table.hf_fraction << "\n";
    return os.str();
}

}  // namespace trifusion::wavelet
