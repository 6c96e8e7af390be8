#include "cognisnn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "cognisnn/error.hpp"
#include "cognisnn/util.hpp"

namespace cognisnn {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

IdxArray load_idx(const std::string& path) {
    std::string raw = read_file(path);
    auto need = [&](std::size_t off, std::size_t n) {
        if (off + n > raw.size())
            throw DataError("idx: truncated file " + path + " at byte offset " +
                            std::to_string(off));
    };
    need(0, 4);
    const auto* b = reinterpret_cast<const uint8_t*>(raw.data());
    if (b[0] != 0 || b[1] != 0)
        throw DataError("idx: bad magic in " + path + " at byte offset 0");
    if (b[2] != 0x08)
        throw DataError("idx: unsupported data type " + std::to_string(b[2]) + " in " +
                        path + " at byte offset 2");
    std::size_t ndim = b[3];
    if (ndim == 0 || ndim > 4)
        throw DataError("idx: implausible dimension count in " + path + " at byte offset 3");
    IdxArray out;
    std::size_t off = 4;
    std::size_t total = 1;
    for (std::size_t i = 0; i < ndim; ++i) {
        need(off, 4);
        uint32_t d = (uint32_t(b[off]) << 24) | (uint32_t(b[off + 1]) << 16) |
                     (uint32_t(b[off + 2]) << 8) | uint32_t(b[off + 3]);
        out.dims.push_back(d);
        total *= d;
        off += 4;
    }
    if (total == 0) throw DataError("idx: empty payload in " + path);
    need(off, total);
    out.bytes.assign(b + off, b + off + total);
    if (off + total != raw.size())
        throw DataError("idx: trailing bytes in " + path + " at byte offset " +
                        std::to_string(off + total));
    return out;
}

void write_idx(const std::string& path, const IdxArray& array) {
    if (array.dims.empty() || array.dims.size() > 4)
        throw InvalidArgument("idx: dimension count must be 1..4");
    std::string out;
    out.push_back(0);
    out.push_back(0);
    out.push_back(char(0x08));
    out.push_back(char(array.dims.size()));
    for (std::size_t d : array.dims) {
        out.push_back(char((d >> 24) & 0xff));
        out.push_back(char((d >> 16) & 0xff));
        out.push_back(char((d >> 8) & 0xff));
        out.push_back(char(d & 0xff));
    }
    out.append(reinterpret_cast<const char*>(array.bytes.data()), array.bytes.size());
    write_file_atomic(path, out);
}

std::vector<Tensor> load_idx_images(const std::string& path) {
    IdxArray arr = load_idx(path);
    if (arr.dims.size() != 3)
        throw DataError("idx: expected [count,rows,cols] image file, got rank " +
                        std::to_string(arr.dims.size()) + " in " + path);
    std::size_t n = arr.dims[0], h = arr.dims[1], w = arr.dims[2];
    std::vector<Tensor> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Tensor img = Tensor::zeros({1, h, w});
        const uint8_t* src = arr.bytes.data() + i * h * w;
        for (std::size_t j = 0; j < h * w; ++j) img.data[j] = double(src[j]) / 255.0;
        out.push_back(std::move(img));
    }
    return out;
}

std::vector<uint32_t> load_idx_labels(const std::string& path) {
    IdxArray arr = load_idx(path);
    if (arr.dims.size() != 1)
        throw DataError("idx: expected rank-1 label file, got rank " +
                        std::to_string(arr.dims.size()) + " in " + path);
    return std::vector<uint32_t>(arr.bytes.begin(), arr.bytes.end());
}

void write_idx_images(const std::string& path, const std::vector<Tensor>& images) {
    if (images.empty()) throw InvalidArgument("idx: nothing to write");
    std::size_t h = images[0].shape[1], w = images[0].shape[2];
    IdxArray arr;
    arr.dims = {images.size(), h, w};
    arr.bytes.reserve(images.size() * h * w);
    for (const Tensor& img : images)
        for (std::size_t j = 0; j < h * w; ++j) {
            double v = std::clamp(img.data[j], 0.0, 1.0);
            arr.bytes.push_back(uint8_t(std::lround(v * 255.0)));
        }
    write_idx(path, arr);
}

void write_idx_labels(const std::string& path, const std::vector<uint32_t>& labels) {
    IdxArray arr;
    arr.dims = {labels.size()};
    for (uint32_t l : labels) arr.bytes.push_back(uint8_t(l));
    write_idx(path, arr);
}

namespace {

Tensor grating_image(uint32_t size, double theta_rad, double phase, double freq,
                     double noise, std::mt19937_64& rng) {
    Tensor img = Tensor::zeros({1, size, size});
    std::normal_distribution<double> jitter(0.0, noise);
    double ct = std::cos(theta_rad), st = std::sin(theta_rad);
    for (uint32_t y = 0; y < size; ++y)
        for (uint32_t x = 0; x < size; ++x) {
            double u = (double(x) * ct + double(y) * st) / double(size);
            double v = 0.5 + 0.45 * std::sin(2.0 * kPi * freq * u + phase);
            if (noise > 0.0) v += jitter(rng);
            img.data[y * size + x] = std::clamp(v, 0.0, 1.0);
        }
    return img;
}

Tensor texture_image(uint32_t size, uint32_t spacing, double noise,
                     std::mt19937_64& rng) {
    Tensor img = Tensor::full({1, size, size}, 0.03);
    std::uniform_int_distribution<uint32_t> off(0, spacing - 1);
    uint32_t dx = off(rng), dy = off(rng);
    for (uint32_t y = dy; y < size; y += spacing)
        for (uint32_t x = dx; x < size; x += spacing) img.data[y * size + x] = 1.0;
    if (noise > 0.0) {
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        for (auto& v : img.data)
            if (unif(rng) < noise * 0.2) v = 1.0;
    }
    return img;
}

}  // namespace

std::vector<Tensor> synth_images(const SynthSpec& spec, uint32_t per_class, uint64_t seed,
                                 std::vector<uint32_t>* labels) {
    if (spec.classes == 0) throw InvalidArgument("synth: need at least one class");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> phase_dist(0.0, 2.0 * kPi);
    std::vector<Tensor> out;
    out.reserve(std::size_t(per_class) * spec.classes);
    for (uint32_t c = 0; c < spec.classes; ++c) {
        for (uint32_t i = 0; i < per_class; ++i) {
            if (spec.family == "gratings") {
                double theta = (spec.orientation_offset_deg +
                                double(c) * 180.0 / double(spec.classes)) *
                               kPi / 180.0;
                double phase = phase_dist(rng);
                out.push_back(grating_image(spec.image_size, theta, phase, 2.0,
                                            spec.noise, rng));
            } else if (spec.family == "textures") {
                uint32_t spacing = 3 + c;
                out.push_back(texture_image(spec.image_size, spacing, spec.noise, rng));
            } else {
                throw ConfigError("synth: unknown family '" + spec.family +
                                  "' (gratings|textures)");
            }
            if (labels) labels->push_back(c);
        }
    }
    return out;
}

TaskData make_synth_task(const SynthSpec& spec, uint32_t time_steps,
                         const std::string& encoding) {
    TaskData task;
    task.classes = spec.classes;
    std::vector<uint32_t> train_labels, test_labels;
    auto train_imgs = synth_images(spec, spec.train_per_class, spec.seed, &train_labels);
    auto test_imgs =
        synth_images(spec, spec.test_per_class, spec.seed ^ 0x9e3779b97f4a7c15ull,
                     &test_labels);
    task.train = encode(train_imgs, train_labels, spec.classes, time_steps, encoding,
                        spec.seed + 17);
    task.test = encode(test_imgs, test_labels, spec.classes, time_steps, encoding,
                       spec.seed + 31);
    return task;
}

SynthPair synth_tasks(const SynthSpec& spec, bool near, uint32_t time_steps,
                      const std::string& encoding) {
    SynthPair pair;
    SynthSpec old_spec = spec;
    old_spec.family = "gratings";
    old_spec.orientation_offset_deg = 0.0;
    pair.old_task = make_synth_task(old_spec, time_steps, encoding);

    SynthSpec new_spec = spec;
    new_spec.seed = spec.seed + 101;
    if (near) {
        // same family, classes at orientations halfway between the old ones
        new_spec.family = "gratings";
        new_spec.orientation_offset_deg = 90.0 / double(spec.classes);
    } else {
        new_spec.family = "textures";
    }
    pair.new_task = make_synth_task(new_spec, time_steps, encoding);
    return pair;
}

EncodedDataset encode(const std::vector<Tensor>& images,
                      const std::vector<uint32_t>& labels, uint32_t classes, uint32_t T,
                      const std::string& mode, uint64_t seed) {
    if (T < 1) throw InvalidArgument("encode: T must be >= 1");
    if (images.size() != labels.size())
        throw InvalidArgument("encode: image/label count mismatch");
    EncodedDataset out;
    out.classes = classes;
    out.encoding = mode;
    out.binary = mode == "rate";
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (std::size_t i = 0; i < images.size(); ++i) {
        const Tensor& img = images[i];
        if (img.rank() != 3) throw DimensionError("encode: images must be [C,H,W]");
        std::size_t chw = img.size();
        Sample s;
        s.label = labels[i];
        s.frames = Tensor::zeros({T, img.shape[0], img.shape[1], img.shape[2]});
        if (mode == "repeat") {
            for (uint32_t t = 0; t < T; ++t)
                std::copy(img.data.begin(), img.data.end(),
                          s.frames.data.begin() + long(t * chw));
        } else if (mode == "rate") {
            for (uint32_t t = 0; t < T; ++t)
                for (std::size_t j = 0; j < chw; ++j)
                    s.frames.data[t * chw + j] = unif(rng) < img.data[j] ? 1.0 : 0.0;
        } else {
            throw ConfigError("encode: unknown mode '" + mode + "' (repeat|rate)");
        }
        out.samples.push_back(std::move(s));
    }
    return out;
}

}  // namespace cognisnn
