#include "cognisnn/checkpoint.hpp"

#include <cstring>

#include "cognisnn/util.hpp"

namespace cognisnn {

namespace {

constexpr char kMagic[8] = {'C', 'O', 'G', 'N', 'I', 'S', 'N', 'N'};
constexpr uint32_t kVersion = 1;

struct Writer {
    std::string out;

    void raw(const void* p, std::size_t n) { out.append(static_cast<const char*>(p), n); }
    void u8(uint8_t v) { raw(&v, 1); }
    void u32(uint32_t v) { raw(&v, 4); }
    void u64(uint64_t v) { raw(&v, 8); }
    void f64(double v) {
        uint64_t bits;
        std::memcpy(&bits, &v, 8);
        u64(bits);
    }
    void str(const std::string& s) {
        u32(uint32_t(s.size()));
        raw(s.data(), s.size());
    }
    void tensor(const Tensor& t) {
        u32(uint32_t(t.rank()));
        for (auto d : t.shape) u64(d);
        for (double v : t.data) f64(v);
    }
};

struct Reader {
    const std::string& in;
    std::size_t pos = 0;

    explicit Reader(const std::string& s) : in(s) {}

    void need(std::size_t n) const {
        if (pos + n > in.size())
            throw DataError("checkpoint: truncated at byte offset " + std::to_string(pos));
    }
    void raw(void* p, std::size_t n) {
        need(n);
        std::memcpy(p, in.data() + pos, n);
        pos += n;
    }
    uint8_t u8() {
        uint8_t v;
        raw(&v, 1);
        return v;
    }
    uint32_t u32() {
        uint32_t v;
        raw(&v, 4);
        return v;
    }
    uint64_t u64() {
        uint64_t v;
        raw(&v, 8);
        return v;
    }
    double f64() {
        uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    std::string str() {
        uint32_t n = u32();
        need(n);
        std::string s(in.data() + pos, n);
        pos += n;
        return s;
    }
    Tensor tensor() {
        uint32_t rank = u32();
        if (rank > 8) throw DataError("checkpoint: implausible tensor rank at offset " +
                                      std::to_string(pos));
        std::vector<std::size_t> shape(rank);
        for (auto& d : shape) d = std::size_t(u64());
        std::size_t n = Tensor::count(shape);
        std::vector<double> data(n);
        for (auto& v : data) v = f64();
        return Tensor(std::move(shape), std::move(data));
    }
};

}  // namespace

std::string checkpoint_to_bytes(const Model& model,
                                const std::map<std::string, std::string>& metadata) {
    Writer w;
    w.raw(kMagic, 8);
    w.u32(kVersion);

    const ModelConfig& c = model.config;
    w.u32(c.channels);
    w.u32(uint32_t(c.gate));
    w.u32(c.time_steps);
    w.f64(c.neuron.v_threshold);
    w.f64(c.neuron.tau);
    w.u32(uint32_t(c.neuron.surrogate));
    w.f64(c.neuron.surrogate_width);
    w.u32(c.eta);
    w.u32(c.kappa);
    w.u32(c.input_channels);
    w.u32(c.image_size);
    w.f64(c.bn_eps);
    w.f64(c.bn_momentum);

    w.str(model.topology.to_text());

    w.u32(uint32_t(model.heads.size()));
    for (auto& [task, classes] : model.heads) {
        w.u32(task);
        w.u32(classes);
    }

    w.u32(uint32_t(metadata.size()));
    for (auto& [k, v] : metadata) {
        w.str(k);
        w.str(v);
    }

    w.u64(model.params.items().size());
    for (auto& [path, p] : model.params.items()) {
        w.str(path);
        w.u8(p.learnable ? 1 : 0);
        w.tensor(p.value);
    }

    w.u32(uint32_t(model.bn_running.size()));
    for (auto& [key, r] : model.bn_running) {
        w.str(key);
        w.f64(r.momentum);
        w.tensor(r.mean);
        w.tensor(r.var);
    }
    return std::move(w.out);
}

Model checkpoint_from_bytes(const std::string& bytes,
                            std::map<std::string, std::string>* metadata_out) {
    Reader r(bytes);
    char magic[8];
    r.raw(magic, 8);
    if (std::memcmp(magic, kMagic, 8) != 0)
        throw DataError("checkpoint: bad magic at byte offset 0");
    uint32_t version = r.u32();
    if (version != kVersion)
        throw DataError("checkpoint: unsupported format version " + std::to_string(version));

    Model m;
    ModelConfig c;
    c.channels = r.u32();
    c.gate = SkipGate(r.u32());
    c.time_steps = r.u32();
    c.neuron.v_threshold = r.f64();
    c.neuron.tau = r.f64();
    c.neuron.surrogate = SurrogateKind(r.u32());
    c.neuron.surrogate_width = r.f64();
    c.eta = r.u32();
    c.kappa = r.u32();
    c.input_channels = r.u32();
    c.image_size = r.u32();
    c.bn_eps = r.f64();
    c.bn_momentum = r.f64();
    m.config = c;

    m.topology = DagTopology::from_text(r.str());

    uint32_t nheads = r.u32();
    for (uint32_t i = 0; i < nheads; ++i) {
        uint32_t task = r.u32();
        uint32_t classes = r.u32();
        m.heads[task] = classes;
    }

    uint32_t nmeta = r.u32();
    std::map<std::string, std::string> meta;
    for (uint32_t i = 0; i < nmeta; ++i) {
        std::string k = r.str();
        meta[k] = r.str();
    }
    if (metadata_out) *metadata_out = meta;

    uint64_t nparams = r.u64();
    for (uint64_t i = 0; i < nparams; ++i) {
        std::string path = r.str();
        bool learnable = r.u8() != 0;
        m.params.add(path, r.tensor(), learnable);
    }

    uint32_t nbn = r.u32();
    for (uint32_t i = 0; i < nbn; ++i) {
        std::string key = r.str();
        BnRunning run;
        run.momentum = r.f64();
        run.mean = r.tensor();
        run.var = r.tensor();
        m.bn_running[key] = std::move(run);
    }
    if (r.pos != bytes.size())
        throw DataError("checkpoint: trailing bytes at offset " + std::to_string(r.pos));
    return m;
}

void save_checkpoint(const Model& model, const std::string& path,
                     const std::map<std::string, std::string>& metadata) {
    write_file_atomic(path, checkpoint_to_bytes(model, metadata));
}

Model load_checkpoint(const std::string& path,
                      std::map<std::string, std::string>* metadata_out) {
    return checkpoint_from_bytes(read_file(path), metadata_out);
}

}  // namespace cognisnn
