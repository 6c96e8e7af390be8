#include "cognisnn/network.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "cognisnn/util.hpp"

namespace cognisnn {

SkipGate parse_gate(const std::string& name) {
    if (name == "or") return SkipGate::or_gate;
    if (name == "add") return SkipGate::add_gate;
    if (name == "and") return SkipGate::and_gate;
    if (name == "iand") return SkipGate::iand_gate;
    if (name == "none") return SkipGate::no_gate;
    throw ConfigError("unknown gate '" + name + "' (or|add|and|iand|none)");
}

std::string gate_name(SkipGate g) {
    switch (g) {
    case SkipGate::or_gate: return "or";
    case SkipGate::add_gate: return "add";
    case SkipGate::and_gate: return "and";
    case SkipGate::iand_gate: return "iand";
    case SkipGate::no_gate: return "none";
    }
    return "?";
}

void ModelConfig::validate() const {
    if (channels == 0) throw ConfigError("model: channels must be positive");
    if (time_steps == 0) throw ConfigError("model: time_steps must be positive");
    if (kappa < 1) throw ConfigError("model: kappa must be >= 1");
    if (eta < 1) throw ConfigError("model: eta must be >= 1");
    if (input_channels == 0) throw ConfigError("model: input_channels must be positive");
    if (image_size == 0) throw ConfigError("model: image_size must be positive");
    neuron.validate();
}

void ParamStore::add(const std::string& path, Tensor value, bool learnable) {
    if (items_.count(path)) throw InternalError("parameter path duplicated: " + path);
    items_[path] = Parameter{std::move(value), learnable};
}

bool ParamStore::has(const std::string& path) const { return items_.count(path) != 0; }

Tensor& ParamStore::at(const std::string& path) {
    auto it = items_.find(path);
    if (it == items_.end()) throw InternalError("parameter path missing: " + path);
    return it->second.value;
}

const Tensor& ParamStore::at(const std::string& path) const {
    auto it = items_.find(path);
    if (it == items_.end()) throw InternalError("parameter path missing: " + path);
    return it->second.value;
}

bool ParamStore::is_learnable(const std::string& path) const {
    auto it = items_.find(path);
    if (it == items_.end()) throw InternalError("parameter path missing: " + path);
    return it->second.learnable;
}

std::vector<std::string> ParamStore::paths() const {
    std::vector<std::string> out;
    for (auto& [k, v] : items_) out.push_back(k);
    return out;
}

std::vector<std::string> ParamStore::learnable_paths() const {
    std::vector<std::string> out;
    for (auto& [k, v] : items_)
        if (v.learnable) out.push_back(k);
    return out;
}

uint32_t standard_pool_dim(uint32_t d, uint32_t eta, uint32_t kappa) {
    if (kappa <= 1) return d;
    if (d >= eta && d % kappa == 0 && d / kappa >= 1) return d / kappa;
    return d;
}

Tensor standard_pool(const Tensor& o, uint32_t eta, uint32_t kappa) {
    std::size_t d = o.shape[o.rank() - 1];
    uint32_t pooled = standard_pool_dim(uint32_t(d), eta, kappa);
    if (pooled == d) return o;
    return avg_pool(o, kappa);
}

Tensor tailored_pool(const Tensor& o, uint32_t target_dim) {
    std::size_t d = o.shape[o.rank() - 1];
    if (target_dim == 0 || d % target_dim != 0)
        throw DimensionError("tailored_pool: dim " + std::to_string(d) +
                             " is not a multiple of target " + std::to_string(target_dim));
    std::size_t kernel = d / target_dim;
    if (kernel == 1) return o;
    return avg_pool(o, kernel);
}

DimPlan plan_dims(const DagTopology& topo, uint32_t stem_dim, uint32_t eta,
                  uint32_t kappa) {
    DimPlan plan;
    plan.node_dim.assign(topo.node_count, 0);
    auto preds = topo.predecessors();
    for (uint32_t v = 0; v < topo.node_count; ++v) {
        if (preds[v].empty()) {
            plan.node_dim[v] = stem_dim;
            continue;
        }
        uint32_t target = 0;
        for (uint32_t p : preds[v]) {
            uint32_t sp = standard_pool_dim(plan.node_dim[p], eta, kappa);
            target = target == 0 ? sp : std::min(target, sp);
        }
        for (uint32_t p : preds[v]) {
            uint32_t sp = standard_pool_dim(plan.node_dim[p], eta, kappa);
            if (sp % target != 0)
                throw DimensionError("plan_dims: predecessor dim " + std::to_string(sp) +
                                     " not aligned to " + std::to_string(target) +
                                     " at node " + std::to_string(v));
            uint32_t sp_kernel = plan.node_dim[p] / sp;
            uint32_t tp_kernel = sp / target;
            plan.edge_pools[{p, v}] = {sp_kernel, tp_kernel};
        }
        plan.node_dim[v] = target;
    }
    return plan;
}

ValueForm combine_gate_form(SkipGate gate, ValueForm a, ValueForm b) {
    if (a == ValueForm::real || b == ValueForm::real) return ValueForm::real;
    switch (gate) {
    case SkipGate::or_gate:
    case SkipGate::and_gate:
    case SkipGate::iand_gate:
        return (a == ValueForm::binary && b == ValueForm::binary) ? ValueForm::binary
                                                                  : ValueForm::integer;
    case SkipGate::add_gate:
        return ValueForm::integer;
    case SkipGate::no_gate:
        return a;
    }
    return ValueForm::real;
}

namespace {

Tensor he_normal(std::vector<std::size_t> shape, std::size_t fan_in,
                 std::mt19937_64& rng) {
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / double(fan_in)));
    Tensor t = Tensor::zeros(std::move(shape));
    for (auto& v : t.data) v = dist(rng);
    return t;
}

}  // namespace

Model Model::build(DagTopology topo, ModelConfig cfg, uint64_t seed) {
    cfg.validate();
    topo.validate();
    // fail early if the wiring cannot be dimension-aligned
    plan_dims(topo, cfg.image_size, cfg.eta, cfg.kappa);

    Model m;
    m.config = cfg;
    m.topology = std::move(topo);
    std::mt19937_64 rng(seed);

    auto add_triplet = [&](const std::string& prefix, std::size_t cin) {
        m.params.add(prefix + ".conv.weight",
                     he_normal({cfg.channels, cin, 3, 3}, cin * 9, rng));
        m.params.add(prefix + ".bn.gamma", Tensor::full({cfg.channels}, 1.0));
        m.params.add(prefix + ".bn.beta", Tensor::zeros({cfg.channels}));
        m.bn_running[prefix + ".bn"] =
            BnRunning{Tensor::zeros({cfg.channels}), Tensor::full({cfg.channels}, 1.0),
                      cfg.bn_momentum};
    };

    add_triplet("stem", cfg.input_channels);
    for (uint32_t v = 0; v < m.topology.node_count; ++v) {
        std::string node = "node" + std::to_string(v);
        add_triplet(node + ".t1", cfg.channels);
        add_triplet(node + ".t2", cfg.channels);
    }
    for (auto& e : m.topology.edges) {
        m.params.add("edge." + std::to_string(e.first) + "-" + std::to_string(e.second) +
                         ".gain",
                     Tensor::zeros({1}));
    }
    return m;
}

void Model::add_head(uint32_t task, uint32_t classes) {
    if (task == kNoTask) throw InvalidArgument("add_head: reserved task id");
    if (classes == 0) throw InvalidArgument("add_head: head dimension must be positive");
    if (heads.count(task))
        throw InvalidArgument("add_head: task " + std::to_string(task) +
                              " already registered");
    heads[task] = classes;
    std::string prefix = "head." + std::to_string(task);
    params.add(prefix + ".weight", Tensor::zeros({classes, config.channels}));
    params.add(prefix + ".bias", Tensor::zeros({classes}));
}

std::vector<std::string> Model::triplet_prefixes() const {
    std::vector<std::string> out{"stem"};
    for (uint32_t v = 0; v < topology.node_count; ++v) {
        out.push_back("node" + std::to_string(v) + ".t1");
        out.push_back("node" + std::to_string(v) + ".t2");
    }
    return out;
}

Var op_aggregate_inputs(Tape& t, const std::vector<AggregateTerm>& terms) {
    if (terms.empty())
        throw InvalidArgument("aggregate_inputs: node needs at least one predecessor");
    std::vector<Var> parts;
    parts.reserve(terms.size());
    for (const AggregateTerm& term : terms) {
        Var x = term.output;
        if (term.sp_kernel > 1) x = op_avg_pool(t, x, term.sp_kernel);
        if (term.tp_kernel > 1) x = op_avg_pool(t, x, term.tp_kernel);
        Var sg = op_sigmoid(t, term.gain);
        parts.push_back(op_scale_by(t, sg, x));
    }
    return op_addn(t, parts);
}

namespace {

// running counters for one forward pass
struct Accountant {
    bool enabled = false;
    OpCounter ops;

    void dense_conv(std::size_t groups, std::size_t cout, std::size_t ho, std::size_t wo,
                    std::size_t cin, std::size_t k) {
        if (enabled) ops.mac += double(groups) * double(cout * ho * wo) * double(cin * k * k);
    }
    // event-driven conv consuming spike-form input: value-weighted accumulates
    void spike_conv(double value_sum, std::size_t cout, std::size_t k) {
        if (enabled) ops.sop += value_sum * double(cout * k * k);
    }
    // event-driven conv consuming pooled (real) input: per-nonzero MACs
    void sparse_conv(std::size_t nnz, std::size_t cout, std::size_t k) {
        if (enabled) ops.mac += double(nnz) * double(cout * k * k);
    }
    void dense_elementwise_mac(std::size_t n) {
        if (enabled) ops.mac += double(n);
    }
};

}  // namespace

ForwardResult Model::forward(Tape& tape, const std::vector<const Tensor*>& frames,
                             uint32_t task, const ForwardOptions& opt) {
    std::vector<uint32_t> tasks;
    if (task != kNoTask) tasks.push_back(task);
    ForwardResult r = forward_multi(tape, frames, tasks, opt);
    if (task != kNoTask) r.logits_single = r.logits.at(task);
    return r;
}

ForwardResult Model::forward_multi(Tape& tape, const std::vector<const Tensor*>& frames,
                                   const std::vector<uint32_t>& tasks,
                                   const ForwardOptions& opt) {
    config.validate();
    const std::size_t batch = frames.size();
    if (batch == 0) throw InvalidArgument("forward: empty batch");
    const std::size_t T = config.time_steps;
    for (auto* f : frames) {
        if (f->rank() != 4 || f->shape[0] != T || f->shape[1] != config.input_channels ||
            f->shape[2] != config.image_size || f->shape[3] != config.image_size)
            throw DimensionError("forward: frame shape does not match model config");
    }
    for (uint32_t task : tasks)
        if (!heads.count(task))
            throw InvalidArgument("forward: unknown task id " + std::to_string(task));

    DimPlan plan = plan_dims(topology, config.image_size, config.eta, config.kappa);
    const std::size_t C = config.channels;

    ForwardResult res;
    Accountant acct;
    acct.enabled = opt.collect_stats;
    res.stats.node.assign(topology.node_count, NodeStats{});
    if (opt.collect_values) {
        res.stats.node_outputs.assign(topology.node_count, {});
        res.stats.node_o1.assign(topology.node_count, {});
    }

    auto pv = [&](const std::string& path) -> Var {
        auto it = res.param_vars.find(path);
        if (it != res.param_vars.end()) return it->second;
        Var v = tape.leaf(params.at(path), "param");
        res.param_vars[path] = v;
        return v;
    };

    // t-major group input [T*B, Cin, H, W]
    const std::size_t hw = config.image_size * config.image_size;
    Tensor group_in =
        Tensor::zeros({T * batch, config.input_channels, config.image_size,
                       config.image_size});
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t b = 0; b < batch; ++b) {
            const double* src = frames[b]->data.data() + t * config.input_channels * hw;
            double* dst =
                group_in.data.data() + (t * batch + b) * config.input_channels * hw;
            std::copy(src, src + config.input_channels * hw, dst);
        }
    Var input_var = tape.leaf(std::move(group_in), "input");

    // conv -> group BN -> per-step LIF over the t-major slices
    auto run_triplet = [&](const std::string& prefix, Var group,
                           std::size_t spatial) -> std::vector<Var> {
        Var w = pv(prefix + ".conv.weight");
        Var conv = op_conv2d(tape, group, w, 1, 1);
        Var g = pv(prefix + ".bn.gamma");
        Var b = pv(prefix + ".bn.beta");
        bool train_bn = opt.train_bn;
        if (train_bn && opt.eval_bn_prefixes && opt.eval_bn_prefixes->count(prefix))
            train_bn = false;
        auto& running = bn_running.at(prefix + ".bn");
        Var bn = train_bn
                     ? op_batch_norm_train(tape, conv, g, b, &running, config.bn_eps)
                     : op_batch_norm_eval(tape, conv, g, b, running, config.bn_eps);
        std::vector<Var> spikes;
        spikes.reserve(T);
        Var membrane = tape.leaf(Tensor::zeros({batch, C, spatial, spatial}), "membrane0");
        for (std::size_t t = 0; t < T; ++t) {
            Var current = op_slice0(tape, bn, t * batch, batch);
            Var h = op_charge(tape, membrane, current, config.neuron);
            Var s = op_fire(tape, h, config.neuron, opt.smooth);
            membrane = op_soft_reset(tape, h, s, config.neuron);
            spikes.push_back(s);
        }
        return spikes;
    };

    acct.dense_conv(T * batch, C, config.image_size, config.image_size,
                    config.input_channels, 3);
    std::vector<Var> stem_out = run_triplet("stem", input_var, config.image_size);
    ValueForm stem_form = opt.smooth ? ValueForm::real : ValueForm::binary;
    if (opt.collect_values)
        for (auto v : stem_out) res.stats.stem_outputs.push_back(tape.value(v));

    auto preds = topology.predecessors();
    std::vector<uint32_t> order;
    if (opt.topo_order) {
        order = *opt.topo_order;
        if (order.size() != topology.node_count)
            throw InvalidArgument("forward: topo order length mismatch");
    } else {
        order.resize(topology.node_count);
        for (uint32_t v = 0; v < topology.node_count; ++v) order[v] = v;
    }
    std::vector<char> done(topology.node_count, 0);
    std::vector<std::vector<Var>> node_out(topology.node_count);
    std::vector<ValueForm> node_form(topology.node_count, ValueForm::real);

    for (uint32_t v : order) {
        std::vector<Var> agg(T);
        std::size_t dim = plan.node_dim[v];
        if (preds[v].empty()) {
            agg = stem_out;  // sources take the stem output directly
        } else {
            for (uint32_t p : preds[v])
                if (!done[p])
                    throw InvalidArgument("forward: order visits node " +
                                          std::to_string(v) + " before predecessor " +
                                          std::to_string(p));
            for (std::size_t t = 0; t < T; ++t) {
                std::vector<AggregateTerm> terms;
                terms.reserve(preds[v].size());
                for (uint32_t p : preds[v]) {
                    auto [sp_k, tp_k] = plan.edge_pools.at({p, v});
                    Var gain = pv("edge." + std::to_string(p) + "-" + std::to_string(v) +
                                  ".gain");
                    terms.push_back(AggregateTerm{node_out[p][t], gain, sp_k, tp_k});
                    acct.dense_elementwise_mac(batch * C * dim * dim);
                }
                agg[t] = op_aggregate_inputs(tape, terms);
            }
        }

        // conv1 consumes the aggregated input; account it per predecessor so
        // spike-driven contributions stay in the accumulate bucket
        if (acct.enabled) {
            if (preds[v].empty()) {
                for (std::size_t t = 0; t < T; ++t) {
                    const Tensor& sv = tape.value(stem_out[t]);
                    if (stem_form != ValueForm::real)
                        acct.spike_conv(sv.sum(), C, 3);
                    else
                        acct.sparse_conv(sv.nonzero_count(), C, 3);
                }
            } else {
                for (uint32_t p : preds[v]) {
                    auto [sp_k, tp_k] = plan.edge_pools.at({p, v});
                    bool spike_driven =
                        sp_k == 1 && tp_k == 1 && node_form[p] != ValueForm::real;
                    for (std::size_t t = 0; t < T; ++t) {
                        const Tensor& ov = tape.value(node_out[p][t]);
                        if (spike_driven)
                            acct.spike_conv(ov.sum(), C, 3);
                        else {
                            std::size_t nnz = sp_k == 1 && tp_k == 1
                                                  ? ov.nonzero_count()
                                                  : batch * C * dim * dim;
                            acct.sparse_conv(nnz, C, 3);
                        }
                    }
                }
            }
        }

        std::string node = "node" + std::to_string(v);
        Var agg_group = op_concat0(tape, agg);
        std::vector<Var> o1 = run_triplet(node + ".t1", agg_group, dim);
        ValueForm o1_form = opt.smooth ? ValueForm::real : ValueForm::binary;
        if (acct.enabled) {
            for (std::size_t t = 0; t < T; ++t) {
                const Tensor& o1v = tape.value(o1[t]);
                if (o1_form != ValueForm::real)
                    acct.spike_conv(o1v.sum(), C, 3);
                else
                    acct.sparse_conv(o1v.nonzero_count(), C, 3);
            }
        }
        Var o1_group = op_concat0(tape, o1);
        std::vector<Var> o2 = run_triplet(node + ".t2", o1_group, dim);
        ValueForm o2_form = opt.smooth ? ValueForm::real : ValueForm::binary;

        std::vector<Var> gated(T);
        for (std::size_t t = 0; t < T; ++t) {
            Var a = o2[t], b = o1[t];
            switch (config.gate) {
            case SkipGate::or_gate:
                gated[t] = op_sub(tape, op_add(tape, a, b), op_mul(tape, a, b));
                break;
            case SkipGate::add_gate:
                gated[t] = op_add(tape, a, b);
                break;
            case SkipGate::and_gate:
                gated[t] = op_mul(tape, a, b);
                break;
            case SkipGate::iand_gate:
                gated[t] = op_mul(tape, op_affine(tape, a, -1.0, 1.0), b);
                break;
            case SkipGate::no_gate:
                gated[t] = a;
                break;
            }
        }
        node_form[v] = combine_gate_form(config.gate, o2_form, o1_form);
        node_out[v] = gated;
        done[v] = 1;

        if (opt.collect_stats) {
            for (std::size_t t = 0; t < T; ++t) {
                const Tensor& val = tape.value(gated[t]);
                res.stats.node[v].value_sum += val.sum();
                res.stats.node[v].elements += double(val.size());
            }
        }
        if (opt.collect_values) {
            for (std::size_t t = 0; t < T; ++t) {
                res.stats.node_outputs[v].push_back(tape.value(gated[t]));
                res.stats.node_o1[v].push_back(tape.value(o1[t]));
            }
        }
    }

    res.node_output_vars = node_out;

    // sink features: global spatial mean, unweighted sink mean, time mean
    auto sink_ids = topology.sinks();
    std::vector<Var> per_t(T);
    for (std::size_t t = 0; t < T; ++t) {
        std::vector<Var> pooled;
        pooled.reserve(sink_ids.size());
        for (uint32_t s : sink_ids)
            pooled.push_back(op_global_avg_pool(tape, node_out[s][t]));
        per_t[t] = op_affine(tape, op_addn(tape, pooled), 1.0 / double(sink_ids.size()), 0.0);
    }
    Var features = op_affine(tape, op_addn(tape, per_t), 1.0 / double(T), 0.0);
    res.features = features;

    for (uint32_t task : tasks) {
        std::string head = "head." + std::to_string(task);
        res.logits[task] =
            op_linear(tape, features, pv(head + ".weight"), pv(head + ".bias"));
        acct.dense_elementwise_mac(batch * heads.at(task) * C);
    }
    res.stats.ops = acct.ops;
    return res;
}

ForwardStats Model::statistics(const std::vector<const Tensor*>& frames) {
    Tape tape;
    ForwardOptions opt;
    opt.collect_stats = true;
    ForwardResult r = forward(tape, frames, kNoTask, opt);
    return r.stats;
}

}  // namespace cognisnn
