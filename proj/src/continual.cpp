#include "cognisnn/continual.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>

#include "cognisnn/util.hpp"

namespace cognisnn {

SimilarityMode parse_similarity(const std::string& name) {
    if (name == "auto") return SimilarityMode::automatic;
    if (name == "similar") return SimilarityMode::similar;
    if (name == "dissimilar") return SimilarityMode::dissimilar;
    throw ConfigError("unknown similarity mode '" + name + "' (auto|similar|dissimilar)");
}

std::string SoftTargetCache::hash_of(const std::vector<Tensor>& logits) {
    std::string bytes;
    for (const Tensor& t : logits)
        bytes.append(reinterpret_cast<const char*>(t.data.data()),
                     t.data.size() * sizeof(double));
    return sha256_hex(bytes);
}

void SoftTargetCache::verify() const {
    if (hash_of(logits) != hash)
        throw InternalError("soft-target cache mutated after creation");
}

SoftTargetCache compute_soft_targets(Model& old_model, const EncodedDataset& new_train,
                                     uint32_t old_task, uint32_t batch_size) {
    SoftTargetCache cache;
    cache.logits.reserve(new_train.samples.size());
    std::size_t n = new_train.samples.size();
    for (std::size_t start = 0; start < n; start += batch_size) {
        std::size_t end = std::min(n, start + batch_size);
        std::vector<const Tensor*> frames;
        for (std::size_t i = start; i < end; ++i)
            frames.push_back(&new_train.samples[i].frames);
        Tape tape;
        ForwardOptions fopt;  // eval-mode BN, spiking forward
        ForwardResult fwd = old_model.forward(tape, frames, old_task, fopt);
        const Tensor& logits = tape.value(fwd.logits_single);
        std::size_t k = logits.shape[1];
        for (std::size_t i = 0; i < frames.size(); ++i) {
            Tensor row = Tensor::zeros({k});
            std::copy(logits.data.begin() + long(i * k),
                      logits.data.begin() + long((i + 1) * k), row.data.begin());
            cache.logits.push_back(std::move(row));
        }
    }
    cache.hash = SoftTargetCache::hash_of(cache.logits);
    return cache;
}

double lwf_loss(const Tensor& new_logits, const std::vector<uint32_t>& new_labels,
                const Tensor& old_logits, const Tensor& soft_targets,
                const LwfConfig& cfg) {
    cfg.validate();
    double l_new = cross_entropy_loss(new_logits, new_labels);
    if (!old_logits.same_shape(soft_targets))
        throw DimensionError("lwf_loss: old logits / soft target shape mismatch");
    std::size_t b = old_logits.rank() == 2 ? old_logits.shape[0] : 1;
    std::size_t k = old_logits.size() / b;
    Tensor p = softmax_rows(soft_targets, cfg.temperature);
    Tensor q = softmax_rows(old_logits, cfg.temperature);
    double l_old = 0.0;
    for (std::size_t i = 0; i < b * k; ++i) l_old -= p.data[i] * std::log(q.data[i]);
    l_old /= double(b);
    return cfg.lambda * l_old + l_new;
}

Var op_lwf_loss(Tape& t, Var new_logits, const std::vector<uint32_t>& new_labels,
                Var old_logits, const Tensor& soft_targets, const LwfConfig& cfg) {
    cfg.validate();
    Var l_new = op_softmax_cross_entropy(t, new_logits, new_labels);
    if (cfg.lambda == 0.0) return l_new;
    Var l_old = op_distill_cross_entropy(t, old_logits, soft_targets, cfg.temperature);
    return op_lincomb(t, l_old, l_new, cfg.lambda, 1.0);
}

namespace {

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    Eigen::VectorXd vals = es.eigenvalues();
    for (long i = 0; i < vals.size(); ++i) vals[i] = vals[i] > 0.0 ? std::sqrt(vals[i]) : 0.0;
    return es.eigenvectors() * vals.asDiagonal() * es.eigenvectors().transpose();
}

void moments(const std::vector<Tensor>& rows, Eigen::VectorXd& mu, Eigen::MatrixXd& cov) {
    std::size_t n = rows.size();
    std::size_t d = rows[0].size();
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(long(n), long(d));
    for (std::size_t i = 0; i < n; ++i) {
        if (rows[i].size() != d)
            throw InvalidArgument("task_similarity: inconsistent feature width");
        for (std::size_t j = 0; j < d; ++j) x(long(i), long(j)) = rows[i].data[j];
    }
    mu = x.colwise().mean();
    Eigen::MatrixXd centered = x.rowwise() - mu.transpose();
    cov = centered.transpose() * centered / double(n - 1);
}

}  // namespace

double task_similarity(const std::vector<Tensor>& features_a,
                       const std::vector<Tensor>& features_b) {
    if (features_a.empty() || features_b.empty())
        throw InvalidArgument("task_similarity: empty feature set");
    std::size_t d = features_a[0].size();
    if (features_a.size() < d + 1 || features_b.size() < d + 1)
        throw InvalidArgument("task_similarity: need at least d+1 = " +
                              std::to_string(d + 1) + " samples per side");
    Eigen::VectorXd mu_a, mu_b;
    Eigen::MatrixXd cov_a, cov_b;
    moments(features_a, mu_a, cov_a);
    moments(features_b, mu_b, cov_b);

    // Tr sqrt(Sa Sb) through the symmetric product Sa^1/2 Sb Sa^1/2, negative
    // eigenvalues clamped at zero
    Eigen::MatrixXd sqrt_a = psd_sqrt(cov_a);
    Eigen::MatrixXd inner = sqrt_a * cov_b * sqrt_a;
    inner = (inner + inner.transpose().eval()) * 0.5;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(inner);
    double tr_sqrt = 0.0;
    for (long i = 0; i < es.eigenvalues().size(); ++i) {
        double v = es.eigenvalues()[i];
        if (v > 0.0) tr_sqrt += std::sqrt(v);
    }
    double mean_term = (mu_a - mu_b).squaredNorm();
    return mean_term + cov_a.trace() + cov_b.trace() - 2.0 * tr_sqrt;
}

std::vector<Tensor> extract_features(Model& model, const EncodedDataset& data,
                                     std::size_t max_samples, uint32_t batch_size) {
    std::vector<Tensor> out;
    std::size_t n = std::min(max_samples, data.samples.size());
    for (std::size_t start = 0; start < n; start += batch_size) {
        std::size_t end = std::min(n, start + batch_size);
        std::vector<const Tensor*> frames;
        for (std::size_t i = start; i < end; ++i)
            frames.push_back(&data.samples[i].frames);
        Tape tape;
        ForwardOptions fopt;
        ForwardResult fwd = model.forward(tape, frames, kNoTask, fopt);
        const Tensor& feats = tape.value(fwd.features);
        std::size_t d = feats.shape[1];
        for (std::size_t i = 0; i < frames.size(); ++i) {
            Tensor row = Tensor::zeros({d});
            std::copy(feats.data.begin() + long(i * d),
                      feats.data.begin() + long((i + 1) * d), row.data.begin());
            out.push_back(std::move(row));
        }
    }
    return out;
}

std::set<std::string> critical_parameter_paths(const DagTopology& topo,
                                               const PathRanking& ranking, std::size_t k,
                                               bool similar) {
    auto paths = select_critical_paths(ranking, k, similar);
    std::set<std::string> out;
    (void)topo;
    for (const Path& p : paths) {
        for (uint32_t v : p.nodes) {
            std::string node = "node" + std::to_string(v);
            for (const char* t : {".t1", ".t2"}) {
                out.insert(node + t + ".conv.weight");
                out.insert(node + t + ".bn.gamma");
                out.insert(node + t + ".bn.beta");
            }
        }
        for (const Edge& e : p.edge_list())
            out.insert("edge." + std::to_string(e.first) + "-" + std::to_string(e.second) +
                       ".gain");
    }
    return out;
}

namespace {

ContinualResult run_lwf(const Model& old_model, const TaskData& old_data,
                        const TaskData& new_data, const ContinualSetup& setup,
                        const LwfConfig& lwf, const TrainConfig& train,
                        bool critical_path) {
    lwf.validate();
    if (setup.new_classes == 0)
        throw InvalidArgument("continual: new head dimension must be positive");
    if (!old_model.has_head(setup.old_task))
        throw InvalidArgument("continual: old model lacks a head for the old task");

    ContinualResult res;
    res.model = old_model;  // line 1: clone into the retrained copy
    if (res.model.has_head(setup.new_task))
        throw InvalidArgument("continual: new task id already registered");
    res.model.add_head(setup.new_task, setup.new_classes);  // line 2: align classifiers

    bool similar = true;
    if (critical_path) {
        switch (setup.similarity) {
        case SimilarityMode::similar:
            similar = true;
            break;
        case SimilarityMode::dissimilar:
            similar = false;
            break;
        case SimilarityMode::automatic: {
            Model frozen = old_model;
            auto fa = extract_features(frozen, old_data.train, lwf.fid_max_samples,
                                       train.batch_size);
            auto fb = extract_features(frozen, new_data.train, lwf.fid_max_samples,
                                       train.batch_size);
            double fid = task_similarity(fa, fb);
            res.fid = fid;
            similar = fid < lwf.similarity_threshold;
            break;
        }
        }
    }
    res.similar_branch = similar;

    // line 3: freeze everything outside the selected paths and the new head
    FreezeMask mask;
    if (critical_path) {
        PathRanking ranking = rank_paths(res.model.topology, lwf.path_cap);
        std::set<std::string> trainable =
            critical_parameter_paths(res.model.topology, ranking, lwf.k_paths, similar);
        std::string new_head = "head." + std::to_string(setup.new_task);
        trainable.insert(new_head + ".weight");
        trainable.insert(new_head + ".bias");
        for (const std::string& path : res.model.params.learnable_paths())
            if (!trainable.count(path)) mask.insert(path);
        res.trainable_paths = std::move(trainable);
    } else {
        for (const std::string& path : res.model.params.learnable_paths())
            res.trainable_paths.insert(path);
    }

    Model teacher = old_model;
    SoftTargetCache targets =
        compute_soft_targets(teacher, new_data.train, setup.old_task, train.batch_size);

    res.old_acc_before =
        evaluate(res.model, old_data.test, setup.old_task, train.batch_size).accuracy;

    std::set<std::string> eval_bn = frozen_bn_prefixes(res.model, mask);

    OptimizerState opt;
    std::mt19937_64 rng(train.seed);
    std::vector<std::size_t> order(new_data.train.samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (uint32_t epoch = 0; epoch < lwf.epochs; ++epoch) {
        targets.verify();  // lines 4-8: LwF updates against the pinned targets
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += train.batch_size) {
            std::size_t end = std::min(order.size(), start + train.batch_size);
            std::vector<const Tensor*> frames;
            std::vector<uint32_t> labels;
            std::size_t b = end - start;
            for (std::size_t i = start; i < end; ++i) {
                frames.push_back(&new_data.train.samples[order[i]].frames);
                labels.push_back(new_data.train.samples[order[i]].label);
            }
            std::size_t k_old = old_model.heads.at(setup.old_task);
            Tensor batch_targets = Tensor::zeros({b, k_old});
            for (std::size_t i = 0; i < b; ++i) {
                const Tensor& row = targets.logits[order[start + i]];
                std::copy(row.data.begin(), row.data.end(),
                          batch_targets.data.begin() + long(i * k_old));
            }

            Tape tape;
            ForwardOptions fopt;
            fopt.train_bn = true;
            fopt.smooth = train.smooth_mode;
            fopt.eval_bn_prefixes = &eval_bn;
            ForwardResult fwd = res.model.forward_multi(
                tape, frames, {setup.old_task, setup.new_task}, fopt);
            Var loss = op_lwf_loss(tape, fwd.logits.at(setup.new_task), labels,
                                   fwd.logits.at(setup.old_task), batch_targets, lwf);
            double loss_value = tape.value(loss).data[0];
            if (!std::isfinite(loss_value)) throw NumericError("continual: non-finite loss");
            tape.backward(loss);

            std::map<std::string, Tensor> grads;
            for (auto& [path, var] : fwd.param_vars) {
                if (!res.model.params.is_learnable(path) || mask.count(path)) continue;
                if (!tape.has_grad(var)) continue;
                grads[path] = tape.grad(var);
            }
            if (!grads.empty()) apply_gradients(res.model, grads, train, opt);
            loss_sum += loss_value * double(b);
        }

        ContinualEpoch ce;
        ce.epoch = epoch;
        ce.new_train_loss =
            order.empty() ? 0.0 : loss_sum / double(order.size());
        ce.new_test_acc =
            evaluate(res.model, new_data.test, setup.new_task, train.batch_size).accuracy;
        ce.old_test_acc =
            evaluate(res.model, old_data.test, setup.old_task, train.batch_size).accuracy;
        res.history.push_back(ce);
    }

    res.old_acc_after =
        evaluate(res.model, old_data.test, setup.old_task, train.batch_size).accuracy;
    res.new_acc_after =
        evaluate(res.model, new_data.test, setup.new_task, train.batch_size).accuracy;
    return res;
}

}  // namespace

ContinualResult critical_path_lwf(const Model& old_model, const TaskData& old_data,
                                  const TaskData& new_data, const ContinualSetup& setup,
                                  const LwfConfig& lwf, const TrainConfig& train) {
    return run_lwf(old_model, old_data, new_data, setup, lwf, train, true);
}

ContinualResult vanilla_lwf(const Model& old_model, const TaskData& old_data,
                            const TaskData& new_data, const ContinualSetup& setup,
                            const LwfConfig& lwf, const TrainConfig& train) {
    return run_lwf(old_model, old_data, new_data, setup, lwf, train, false);
}

}  // namespace cognisnn
