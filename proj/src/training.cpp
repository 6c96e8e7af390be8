#include "cognisnn/training.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "cognisnn/util.hpp"

namespace cognisnn {

OptimizerKind parse_optimizer(const std::string& name) {
    if (name == "sgd") return OptimizerKind::sgd;
    if (name == "adam") return OptimizerKind::adam;
    throw ConfigError("unknown optimizer '" + name + "' (sgd|adam)");
}

double cross_entropy_loss(const Tensor& logits, const std::vector<uint32_t>& labels) {
    std::size_t b = logits.rank() == 2 ? logits.shape[0] : 1;
    std::size_t k = logits.size() / b;
    if (labels.size() != b) throw InvalidArgument("cross_entropy: label count mismatch");
    double total = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
        if (labels[i] >= k)
            throw InvalidArgument("cross_entropy: label " + std::to_string(labels[i]) +
                                  " out of range for " + std::to_string(k) + " classes");
        const double* z = logits.data.data() + i * k;
        double zmax = z[0];
        for (std::size_t j = 1; j < k; ++j) zmax = std::max(zmax, z[j]);
        double lse = 0.0;
        for (std::size_t j = 0; j < k; ++j) lse += std::exp(z[j] - zmax);
        total += std::log(lse) + zmax - z[labels[i]];
    }
    double loss = total / double(b);
    if (!std::isfinite(loss)) throw NumericError("cross_entropy: non-finite loss");
    return loss;
}

double relative_error(double a, double b) {
    double denom = std::max({std::abs(a), std::abs(b), 1e-3});
    return std::abs(a - b) / denom;
}

// a triplet whose every learnable parameter is masked keeps its BN pinned to
// eval mode, so frozen nodes neither normalize by new-task statistics nor
// drift their running buffers
std::set<std::string> frozen_bn_prefixes(const Model& model, const FreezeMask& mask) {
    std::set<std::string> out;
    for (const std::string& prefix : model.triplet_prefixes()) {
        bool all_frozen = mask.count(prefix + ".conv.weight") &&
                          mask.count(prefix + ".bn.gamma") &&
                          mask.count(prefix + ".bn.beta");
        if (all_frozen) out.insert(prefix);
    }
    return out;
}

namespace {

void check_finite_or_abort(const Model& model, const std::map<std::string, Tensor>& grads,
                           double loss) {
    if (std::isfinite(loss)) {
        bool ok = true;
        for (auto& [path, g] : grads)
            if (!g.all_finite()) {
                ok = false;
                break;
            }
        if (ok) return;
    }
    for (auto& [path, p] : model.params.items())
        if (!p.value.all_finite())
            throw NumericError("non-finite value in parameter " + path);
    for (auto& [path, g] : grads)
        if (!g.all_finite()) throw NumericError("non-finite gradient for parameter " + path);
    throw NumericError("non-finite loss");
}

}  // namespace

void apply_gradients(Model& model, std::map<std::string, Tensor>& grads,
                     const TrainConfig& cfg, OptimizerState& opt) {
    if (cfg.clip_norm > 0.0) {
        double sq = 0.0;
        for (auto& [path, g] : grads)
            for (double v : g.data) sq += v * v;
        double norm = std::sqrt(sq);
        if (norm > cfg.clip_norm) {
            double scale = cfg.clip_norm / norm;
            for (auto& [path, g] : grads)
                for (double& v : g.data) v *= scale;
        }
    }
    opt.step += 1;
    if (cfg.optimizer == OptimizerKind::adam) {
        const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
        double c1 = 1.0 - std::pow(b1, double(opt.step));
        double c2 = 1.0 - std::pow(b2, double(opt.step));
        for (auto& [path, g] : grads) {
            Tensor& p = model.params.at(path);
            Tensor& m = opt.m.try_emplace(path, Tensor::zeros(p.shape)).first->second;
            Tensor& v = opt.v.try_emplace(path, Tensor::zeros(p.shape)).first->second;
            for (std::size_t i = 0; i < p.size(); ++i) {
                m.data[i] = b1 * m.data[i] + (1.0 - b1) * g.data[i];
                v.data[i] = b2 * v.data[i] + (1.0 - b2) * g.data[i] * g.data[i];
                double mhat = m.data[i] / c1;
                double vhat = v.data[i] / c2;
                p.data[i] -= cfg.lr * (mhat / (std::sqrt(vhat) + eps) +
                                       cfg.weight_decay * p.data[i]);
            }
        }
    } else {
        for (auto& [path, g] : grads) {
            Tensor& p = model.params.at(path);
            Tensor& vel = opt.m.try_emplace(path, Tensor::zeros(p.shape)).first->second;
            for (std::size_t i = 0; i < p.size(); ++i) {
                vel.data[i] = cfg.momentum * vel.data[i] + g.data[i];
                p.data[i] -= cfg.lr * (vel.data[i] + cfg.weight_decay * p.data[i]);
            }
        }
    }
}

namespace {

uint32_t count_correct(const Tensor& logits, const std::vector<uint32_t>& labels) {
    std::size_t b = logits.shape[0], k = logits.shape[1];
    uint32_t correct = 0;
    for (std::size_t i = 0; i < b; ++i) {
        const double* z = logits.data.data() + i * k;
        std::size_t best = 0;
        for (std::size_t j = 1; j < k; ++j)
            if (z[j] > z[best]) best = j;
        correct += (best == labels[i]);
    }
    return correct;
}

}  // namespace

StepMetrics train_step(Model& model, const std::vector<const Tensor*>& frames,
                       const std::vector<uint32_t>& labels, uint32_t task,
                       const TrainConfig& cfg, const FreezeMask& mask,
                       OptimizerState& opt) {
    Tape tape;
    ForwardOptions fopt;
    fopt.train_bn = true;
    fopt.smooth = cfg.smooth_mode;
    fopt.collect_stats = true;
    std::set<std::string> eval_bn = frozen_bn_prefixes(model, mask);
    fopt.eval_bn_prefixes = &eval_bn;

    ForwardResult fwd = model.forward(tape, frames, task, fopt);
    Var loss = op_softmax_cross_entropy(tape, fwd.logits_single, labels);
    double loss_value = tape.value(loss).data[0];
    tape.backward(loss);

    std::map<std::string, Tensor> grads;
    for (auto& [path, var] : fwd.param_vars) {
        if (!model.params.is_learnable(path) || mask.count(path)) continue;
        if (!tape.has_grad(var)) continue;
        grads[path] = tape.grad(var);
    }
    check_finite_or_abort(model, grads, loss_value);
    apply_gradients(model, grads, cfg, opt);

    StepMetrics sm;
    sm.loss = loss_value;
    sm.correct = count_correct(tape.value(fwd.logits_single), labels);
    sm.spike_rate = fwd.stats.mean_rate();
    return sm;
}

std::string metrics_line(const EpochMetrics& m) {
    return "epoch=" + std::to_string(m.epoch) + " split=" + m.split +
           " loss=" + format_double(m.loss) + " acc=" + format_double(m.accuracy) +
           " spike_rate=" + format_double(m.spike_rate);
}

EvalMetrics evaluate(Model& model, const EncodedDataset& data, uint32_t task,
                     uint32_t batch_size) {
    if (data.samples.empty()) throw InvalidArgument("evaluate: empty dataset");
    EvalMetrics em;
    double total_loss = 0.0;
    double total_rate = 0.0;
    uint32_t correct = 0;
    std::size_t n = data.samples.size();
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += batch_size) {
        std::size_t end = std::min(n, start + batch_size);
        std::vector<const Tensor*> frames;
        std::vector<uint32_t> labels;
        for (std::size_t i = start; i < end; ++i) {
            frames.push_back(&data.samples[i].frames);
            labels.push_back(data.samples[i].label);
        }
        Tape tape;
        ForwardOptions fopt;
        fopt.collect_stats = true;
        ForwardResult fwd = model.forward(tape, frames, task, fopt);
        const Tensor& logits = tape.value(fwd.logits_single);
        total_loss += cross_entropy_loss(logits, labels) * double(labels.size());
        correct += count_correct(logits, labels);
        total_rate += fwd.stats.mean_rate();
        batches += 1;
    }
    em.loss = total_loss / double(n);
    em.accuracy = double(correct) / double(n);
    em.spike_rate = batches ? total_rate / double(batches) : 0.0;
    return em;
}

FitResult fit(Model& model, const EncodedDataset& train, const EncodedDataset* test,
              uint32_t task, const TrainConfig& cfg, const FreezeMask& mask) {
    if (train.samples.empty()) throw InvalidArgument("fit: empty dataset");
    FitResult out;
    OptimizerState opt;
    std::mt19937_64 rng(cfg.seed);
    std::vector<std::size_t> order(train.samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (uint32_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        double rate_sum = 0.0;
        uint32_t correct = 0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            std::size_t end = std::min(order.size(), start + cfg.batch_size);
            std::vector<const Tensor*> frames;
            std::vector<uint32_t> labels;
            for (std::size_t i = start; i < end; ++i) {
                frames.push_back(&train.samples[order[i]].frames);
                labels.push_back(train.samples[order[i]].label);
            }
            StepMetrics sm = train_step(model, frames, labels, task, cfg, mask, opt);
            loss_sum += sm.loss * double(labels.size());
            correct += sm.correct;
            rate_sum += sm.spike_rate;
            batches += 1;
        }
        EpochMetrics tm;
        tm.epoch = epoch;
        tm.split = "train";
        tm.loss = loss_sum / double(order.size());
        tm.accuracy = double(correct) / double(order.size());
        tm.spike_rate = batches ? rate_sum / double(batches) : 0.0;
        out.history.push_back(tm);

        if (test && !test->samples.empty()) {
            EvalMetrics ev = evaluate(model, *test, task, cfg.batch_size);
            EpochMetrics em;
            em.epoch = epoch;
            em.split = "test";
            em.loss = ev.loss;
            em.accuracy = ev.accuracy;
            em.spike_rate = ev.spike_rate;
            out.history.push_back(em);
        }
    }
    return out;
}

GradCheckReport gradient_check(Model& model, const Sample& sample, uint32_t task,
                               std::size_t min_params, double fd_step, uint64_t seed) {
    // FD through the true Heaviside is meaningless; the check runs with the
    // smooth surrogate forward
    std::vector<const Tensor*> frames{&sample.frames};
    std::vector<uint32_t> labels{sample.label};

    auto saved_running = model.bn_running;
    auto loss_eval = [&]() {
        Tape tape;
        ForwardOptions fopt;
        fopt.train_bn = true;
        fopt.smooth = true;
        ForwardResult fwd = model.forward(tape, frames, task, fopt);
        return cross_entropy_loss(tape.value(fwd.logits_single), labels);
    };

    Tape tape;
    ForwardOptions fopt;
    fopt.train_bn = true;
    fopt.smooth = true;
    ForwardResult fwd = model.forward(tape, frames, task, fopt);
    Var loss = op_softmax_cross_entropy(tape, fwd.logits_single, labels);
    tape.backward(loss);

    std::vector<std::string> touched;
    for (auto& [path, var] : fwd.param_vars)
        if (model.params.is_learnable(path)) touched.push_back(path);

    std::size_t total_scalars = 0;
    for (auto& p : touched) total_scalars += model.params.at(p).size();
    std::size_t want = std::min(min_params, total_scalars);

    // round-robin over parameter tensors, seeded offsets within each
    std::mt19937_64 rng(seed);
    std::map<std::string, std::vector<std::size_t>> picks;
    std::size_t chosen = 0;
    std::size_t round = 0;
    while (chosen < want) {
        bool any = false;
        for (auto& path : touched) {
            std::size_t n = model.params.at(path).size();
            if (round < n && chosen < want) {
                std::size_t idx = rng() % n;
                auto& v = picks[path];
                if (std::find(v.begin(), v.end(), idx) == v.end()) {
                    v.push_back(idx);
                    ++chosen;
                }
                any = true;
            }
        }
        if (!any) break;
        ++round;
    }

    GradCheckReport report;
    for (auto& [path, idxs] : picks) {
        GradCheckGroup group;
        group.path = path;
        const Tensor analytic = tape.grad(fwd.param_vars.at(path));
        Tensor& pv = model.params.at(path);
        for (std::size_t idx : idxs) {
            double orig = pv.data[idx];
            pv.data[idx] = orig + fd_step;
            double lp = loss_eval();
            pv.data[idx] = orig - fd_step;
            double lm = loss_eval();
            pv.data[idx] = orig;
            double fd = (lp - lm) / (2.0 * fd_step);
            double err = relative_error(fd, analytic.data[idx]);
            group.max_rel_err = std::max(group.max_rel_err, err);
            group.checked += 1;
        }
        report.max_rel_err = std::max(report.max_rel_err, group.max_rel_err);
        report.total_checked += group.checked;
        report.groups.push_back(std::move(group));
    }
    model.bn_running = saved_running;  // undo FD side effects on running stats
    return report;
}

}  // namespace cognisnn
