#include "cognisnn/config.hpp"

#include <map>
#include <set>
#include <sstream>

#include "cognisnn/util.hpp"

namespace cognisnn {

DagTopology TopologySpec::build() const {
    if (generator == "er") return generate_er(nodes, edge_prob, seed);
    if (generator == "ws") return generate_ws(nodes, ws_k, ws_rewire, seed);
    if (generator == "chain") return make_chain(nodes);
    if (generator == "file") {
        if (file.empty()) throw ConfigError("topology: generator=file needs file=");
        return DagTopology::from_text(read_file(file));
    }
    throw ConfigError("topology: unknown generator '" + generator +
                      "' (er|ws|chain|file)");
}

namespace {

const std::map<std::string, std::set<std::string>>& schema() {
    static const std::map<std::string, std::set<std::string>> s = {
        {"experiment", {"seed"}},
        {"topology", {"generator", "nodes", "edge_prob", "ws_k", "ws_rewire", "seed", "file"}},
        {"model",
         {"channels", "gate", "time_steps", "threshold", "tau", "surrogate",
          "surrogate_width", "eta", "kappa", "input_channels", "image_size"}},
        {"train",
         {"optimizer", "lr", "momentum", "weight_decay", "epochs", "batch_size", "seed",
          "clip_norm", "smooth_mode"}},
        {"lwf",
         {"lambda", "temperature", "epochs", "threshold", "k_paths", "method",
          "similarity", "old_checkpoint", "fid_max_samples"}},
        {"dataset",
         {"type", "family", "classes", "image_size", "train_per_class", "test_per_class",
          "noise", "seed", "pair", "encoding", "train_images", "train_labels",
          "test_images", "test_labels"}},
        {"energy", {"e_mac_pj", "e_sop_pj", "samples", "checkpoint"}},
        {"gradcheck", {"samples", "tolerance"}},
        {"eval", {"checkpoint"}},
    };
    return s;
}

struct KvMap {
    std::map<std::string, std::string> values;  // "section.key" -> value

    bool has(const std::string& k) const { return values.count(k) != 0; }
    std::string str(const std::string& k, const std::string& dflt) const {
        auto it = values.find(k);
        return it == values.end() ? dflt : it->second;
    }
    uint64_t u64(const std::string& k, uint64_t dflt) const {
        auto it = values.find(k);
        return it == values.end() ? dflt : parse_u64(it->second, k);
    }
    double num(const std::string& k, double dflt) const {
        auto it = values.find(k);
        return it == values.end() ? dflt : parse_double(it->second, k);
    }
    bool flag(const std::string& k, bool dflt) const {
        auto it = values.find(k);
        if (it == values.end()) return dflt;
        if (it->second == "true" || it->second == "1") return true;
        if (it->second == "false" || it->second == "0") return false;
        throw ConfigError("expected true/false for " + k + ", got '" + it->second + "'");
    }
};

KvMap parse_kv(const std::string& text) {
    KvMap kv;
    std::istringstream in(text);
    std::string line;
    std::string section;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        if (t.front() == '[' && t.back() == ']') {
            section = trim(t.substr(1, t.size() - 2));
            if (!schema().count(section))
                throw ConfigError("config line " + std::to_string(lineno) +
                                  ": unknown section [" + section + "]");
            continue;
        }
        auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) +
                              ": expected key = value, got '" + t + "'");
        if (section.empty())
            throw ConfigError("config line " + std::to_string(lineno) +
                              ": key before any [section]");
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        if (!schema().at(section).count(key))
            throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" +
                              key + "' in section [" + section + "]");
        std::string full = section + "." + key;
        if (kv.values.count(full))
            throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key " +
                              full);
        kv.values[full] = value;
    }
    return kv;
}

SurrogateKind parse_surrogate(const std::string& name) {
    if (name == "arctan") return SurrogateKind::arctan;
    if (name == "rectangular") return SurrogateKind::rectangular;
    throw ConfigError("unknown surrogate '" + name + "' (arctan|rectangular)");
}

std::string surrogate_name(SurrogateKind k) {
    return k == SurrogateKind::arctan ? "arctan" : "rectangular";
}

}  // namespace

ExperimentConfig ExperimentConfig::parse(const std::string& text) {
    KvMap kv = parse_kv(text);
    ExperimentConfig c;

    c.seed = kv.u64("experiment.seed", 0);

    c.topology.generator = kv.str("topology.generator", c.topology.generator);
    c.topology.nodes = uint32_t(kv.u64("topology.nodes", c.topology.nodes));
    c.topology.edge_prob = kv.num("topology.edge_prob", c.topology.edge_prob);
    c.topology.ws_k = uint32_t(kv.u64("topology.ws_k", c.topology.ws_k));
    c.topology.ws_rewire = kv.num("topology.ws_rewire", c.topology.ws_rewire);
    c.topology.file = kv.str("topology.file", "");

    c.model.channels = uint32_t(kv.u64("model.channels", c.model.channels));
    c.model.gate = parse_gate(kv.str("model.gate", "or"));
    c.model.time_steps = uint32_t(kv.u64("model.time_steps", c.model.time_steps));
    c.model.neuron.v_threshold = kv.num("model.threshold", c.model.neuron.v_threshold);
    c.model.neuron.tau = kv.num("model.tau", c.model.neuron.tau);
    c.model.neuron.surrogate = parse_surrogate(kv.str("model.surrogate", "arctan"));
    c.model.neuron.surrogate_width =
        kv.num("model.surrogate_width", c.model.neuron.surrogate_width);
    c.model.eta = uint32_t(kv.u64("model.eta", c.model.eta));
    c.model.kappa = uint32_t(kv.u64("model.kappa", c.model.kappa));
    c.model.input_channels =
        uint32_t(kv.u64("model.input_channels", c.model.input_channels));
    c.model.image_size = uint32_t(kv.u64("model.image_size", c.model.image_size));

    c.train.optimizer = parse_optimizer(kv.str("train.optimizer", "adam"));
    c.train.lr = kv.num("train.lr", c.train.lr);
    c.train.momentum = kv.num("train.momentum", c.train.momentum);
    c.train.weight_decay = kv.num("train.weight_decay", c.train.weight_decay);
    c.train.epochs = uint32_t(kv.u64("train.epochs", c.train.epochs));
    c.train.batch_size = uint32_t(kv.u64("train.batch_size", c.train.batch_size));
    c.train.clip_norm = kv.num("train.clip_norm", c.train.clip_norm);
    c.train.smooth_mode = kv.flag("train.smooth_mode", c.train.smooth_mode);

    c.lwf.lambda = kv.num("lwf.lambda", c.lwf.lambda);
    c.lwf.temperature = kv.num("lwf.temperature", c.lwf.temperature);
    c.lwf.epochs = uint32_t(kv.u64("lwf.epochs", c.lwf.epochs));
    c.lwf.similarity_threshold = kv.num("lwf.threshold", c.lwf.similarity_threshold);
    c.lwf.k_paths = uint32_t(kv.u64("lwf.k_paths", c.lwf.k_paths));
    c.lwf.fid_max_samples = kv.u64("lwf.fid_max_samples", c.lwf.fid_max_samples);
    c.lwf_method = kv.str("lwf.method", c.lwf_method);
    c.lwf_similarity = kv.str("lwf.similarity", c.lwf_similarity);
    c.continual_old_checkpoint = kv.str("lwf.old_checkpoint", "");

    c.dataset.type = kv.str("dataset.type", c.dataset.type);
    c.dataset.synth.family = kv.str("dataset.family", c.dataset.synth.family);
    c.dataset.synth.classes = uint32_t(kv.u64("dataset.classes", c.dataset.synth.classes));
    c.dataset.synth.image_size =
        uint32_t(kv.u64("dataset.image_size", c.dataset.synth.image_size));
    c.dataset.synth.train_per_class =
        uint32_t(kv.u64("dataset.train_per_class", c.dataset.synth.train_per_class));
    c.dataset.synth.test_per_class =
        uint32_t(kv.u64("dataset.test_per_class", c.dataset.synth.test_per_class));
    c.dataset.synth.noise = kv.num("dataset.noise", c.dataset.synth.noise);
    c.dataset.pair = kv.str("dataset.pair", c.dataset.pair);
    c.dataset.encoding = kv.str("dataset.encoding", c.dataset.encoding);
    c.dataset.idx_train_images = kv.str("dataset.train_images", "");
    c.dataset.idx_train_labels = kv.str("dataset.train_labels", "");
    c.dataset.idx_test_images = kv.str("dataset.test_images", "");
    c.dataset.idx_test_labels = kv.str("dataset.test_labels", "");
    c.dataset.idx_classes = c.dataset.synth.classes;

    c.energy.e_mac_pj = kv.num("energy.e_mac_pj", c.energy.e_mac_pj);
    c.energy.e_sop_pj = kv.num("energy.e_sop_pj", c.energy.e_sop_pj);
    c.energy.samples = uint32_t(kv.u64("energy.samples", c.energy.samples));
    c.energy.checkpoint = kv.str("energy.checkpoint", "");

    c.gradcheck.samples = uint32_t(kv.u64("gradcheck.samples", c.gradcheck.samples));
    c.gradcheck.tolerance = kv.num("gradcheck.tolerance", c.gradcheck.tolerance);

    c.eval_checkpoint = kv.str("eval.checkpoint", "");

    // per-section seeds default to fixed offsets from the master seed
    c.topology.seed = kv.has("topology.seed") ? kv.u64("topology.seed", 0) : c.seed + 1000;
    c.dataset.synth.seed =
        kv.has("dataset.seed") ? kv.u64("dataset.seed", 0) : c.seed + 2000;
    c.train.seed = kv.has("train.seed") ? kv.u64("train.seed", 0) : c.seed + 3000;

    if (c.dataset.synth.image_size != c.model.image_size &&
        c.dataset.type != "idx")
        c.model.image_size = c.dataset.synth.image_size;
    return c;
}

void ExperimentConfig::apply_seed_override(uint64_t master) {
    seed = master;
    topology.seed = master + 1000;
    dataset.synth.seed = master + 2000;
    train.seed = master + 3000;
}

std::string ExperimentConfig::canonical_text() const {
    std::ostringstream o;
    o << "[experiment]\n";
    o << "seed = " << seed << "\n";
    o << "\n[topology]\n";
    o << "generator = " << topology.generator << "\n";
    o << "nodes = " << topology.nodes << "\n";
    o << "edge_prob = " << format_double(topology.edge_prob) << "\n";
    o << "ws_k = " << topology.ws_k << "\n";
    o << "ws_rewire = " << format_double(topology.ws_rewire) << "\n";
    o << "seed = " << topology.seed << "\n";
    if (!topology.file.empty()) o << "file = " << topology.file << "\n";
    o << "\n[model]\n";
    o << "channels = " << model.channels << "\n";
    o << "gate = " << gate_name(model.gate) << "\n";
    o << "time_steps = " << model.time_steps << "\n";
    o << "threshold = " << format_double(model.neuron.v_threshold) << "\n";
    o << "tau = " << format_double(model.neuron.tau) << "\n";
    o << "surrogate = " << surrogate_name(model.neuron.surrogate) << "\n";
    o << "surrogate_width = " << format_double(model.neuron.surrogate_width) << "\n";
    o << "eta = " << model.eta << "\n";
    o << "kappa = " << model.kappa << "\n";
    o << "input_channels = " << model.input_channels << "\n";
    o << "image_size = " << model.image_size << "\n";
    o << "\n[train]\n";
    o << "optimizer = " << (train.optimizer == OptimizerKind::adam ? "adam" : "sgd")
      << "\n";
    o << "lr = " << format_double(train.lr) << "\n";
    o << "momentum = " << format_double(train.momentum) << "\n";
    o << "weight_decay = " << format_double(train.weight_decay) << "\n";
    o << "epochs = " << train.epochs << "\n";
    o << "batch_size = " << train.batch_size << "\n";
    o << "seed = " << train.seed << "\n";
    o << "clip_norm = " << format_double(train.clip_norm) << "\n";
    o << "smooth_mode = " << (train.smooth_mode ? "true" : "false") << "\n";
    o << "\n[lwf]\n";
    o << "lambda = " << format_double(lwf.lambda) << "\n";
    o << "temperature = " << format_double(lwf.temperature) << "\n";
    o << "epochs = " << lwf.epochs << "\n";
    o << "threshold = " << format_double(lwf.similarity_threshold) << "\n";
    o << "k_paths = " << lwf.k_paths << "\n";
    o << "fid_max_samples = " << lwf.fid_max_samples << "\n";
    o << "method = " << lwf_method << "\n";
    o << "similarity = " << lwf_similarity << "\n";
    if (!continual_old_checkpoint.empty())
        o << "old_checkpoint = " << continual_old_checkpoint << "\n";
    o << "\n[dataset]\n";
    o << "type = " << dataset.type << "\n";
    o << "family = " << dataset.synth.family << "\n";
    o << "classes = " << dataset.synth.classes << "\n";
    o << "image_size = " << dataset.synth.image_size << "\n";
    o << "train_per_class = " << dataset.synth.train_per_class << "\n";
    o << "test_per_class = " << dataset.synth.test_per_class << "\n";
    o << "noise = " << format_double(dataset.synth.noise) << "\n";
    o << "seed = " << dataset.synth.seed << "\n";
    o << "pair = " << dataset.pair << "\n";
    o << "encoding = " << dataset.encoding << "\n";
    if (!dataset.idx_train_images.empty()) {
        o << "train_images = " << dataset.idx_train_images << "\n";
        o << "train_labels = " << dataset.idx_train_labels << "\n";
        o << "test_images = " << dataset.idx_test_images << "\n";
        o << "test_labels = " << dataset.idx_test_labels << "\n";
    }
    o << "\n[energy]\n";
    o << "e_mac_pj = " << format_double(energy.e_mac_pj) << "\n";
    o << "e_sop_pj = " << format_double(energy.e_sop_pj) << "\n";
    o << "samples = " << energy.samples << "\n";
    if (!energy.checkpoint.empty()) o << "checkpoint = " << energy.checkpoint << "\n";
    o << "\n[gradcheck]\n";
    o << "samples = " << gradcheck.samples << "\n";
    o << "tolerance = " << format_double(gradcheck.tolerance) << "\n";
    if (!eval_checkpoint.empty()) {
        o << "\n[eval]\n";
        o << "checkpoint = " << eval_checkpoint << "\n";
    }
    return o.str();
}

}  // namespace cognisnn
