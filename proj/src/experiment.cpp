#include "cognisnn/experiment.hpp"

#include <filesystem>
#include <sstream>

#include "cognisnn/checkpoint.hpp"
#include "cognisnn/continual.hpp"
#include "cognisnn/dataset.hpp"
#include "cognisnn/util.hpp"

namespace cognisnn {

namespace {

constexpr uint32_t kDefaultTask = 0;

// write-once artifact sink; every file lands atomically and its hash goes
// into the manifest
class ArtifactWriter {
public:
    ArtifactWriter(std::string out_dir) : dir_(std::move(out_dir)) {
        std::error_code ec;
        std::filesystem::create_directories(dir_, ec);
        if (ec) throw DataError("cannot create output directory " + dir_);
    }

    void write(const std::string& name, const std::string& content) {
        write_file_atomic(dir_ + "/" + name, content);
        outputs_.push_back({name, sha256_hex(content)});
    }

    void finish(const std::string& subcommand, const ExperimentConfig& cfg,
                bool smooth_mode) {
        std::ostringstream m;
        std::string config_text = cfg.canonical_text();
        m << "cognisnn manifest v1\n";
        m << "subcommand " << subcommand << "\n";
        m << "seed " << cfg.seed << "\n";
        m << "smooth_mode " << (smooth_mode ? 1 : 0) << "\n";
        m << "config_sha256 " << sha256_hex(config_text) << "\n";
        m << "config_begin\n" << config_text << "config_end\n";
        for (auto& [name, sha] : outputs_) m << "output " << name << " " << sha << "\n";
        write_file_atomic(dir_ + "/manifest.txt", m.str());
    }

private:
    std::string dir_;
    std::vector<std::pair<std::string, std::string>> outputs_;
};

std::string render_metrics(const std::vector<EpochMetrics>& history) {
    std::string out;
    for (const auto& m : history) out += metrics_line(m) + "\n";
    return out;
}

std::string render_paths(const PathRanking& ranking) {
    std::ostringstream o;
    o << "TOTAL " << ranking.size() << "\n";
    for (auto& [path, score] : ranking.entries) {
        o << "CB " << format_double(score) << " NODES";
        for (uint32_t v : path.nodes) o << " " << v;
        o << "\n";
    }
    return o.str();
}

Model build_model_for(const ExperimentConfig& cfg, const TaskData& data) {
    DagTopology topo = cfg.topology.build();
    ModelConfig mc = cfg.model;
    Model model = Model::build(std::move(topo), mc, cfg.seed);
    model.add_head(kDefaultTask, data.classes);
    return model;
}

uint32_t first_task(const Model& model) {
    if (model.heads.empty()) throw InvalidArgument("checkpoint has no classifier heads");
    return model.heads.begin()->first;
}

void do_generate_graph(const ExperimentConfig& cfg, ArtifactWriter& art) {
    DagTopology topo = cfg.topology.build();
    art.write("topology.txt", topo.to_text());
}

void do_paths(const ExperimentConfig& cfg, ArtifactWriter& art) {
    DagTopology topo = cfg.topology.build();
    PathRanking ranking = rank_paths(topo, cfg.lwf.path_cap);
    art.write("topology.txt", topo.to_text());
    art.write("paths.txt", render_paths(ranking));
}

void do_train(const ExperimentConfig& cfg, ArtifactWriter& art, bool smooth) {
    cfg.train.validate();
    TaskData data = build_dataset(cfg.dataset, cfg.model.time_steps);
    Model model = build_model_for(cfg, data);
    TrainConfig tc = cfg.train;
    tc.smooth_mode = tc.smooth_mode || smooth;
    FitResult fr = fit(model, data.train, &data.test, kDefaultTask, tc);
    art.write("topology.txt", model.topology.to_text());
    art.write("metrics.txt", render_metrics(fr.history));
    std::map<std::string, std::string> meta{
        {"config_sha256", sha256_hex(cfg.canonical_text())},
        {"task", std::to_string(kDefaultTask)}};
    art.write("checkpoint.bin", checkpoint_to_bytes(model, meta));
}

void do_eval(const ExperimentConfig& cfg, ArtifactWriter& art) {
    if (cfg.eval_checkpoint.empty())
        throw ConfigError("eval: [eval] checkpoint is required");
    Model model = load_checkpoint(cfg.eval_checkpoint);
    uint32_t task = first_task(model);
    TaskData data = build_dataset(cfg.dataset, model.config.time_steps);
    EvalMetrics ev = evaluate(model, data.test, task, cfg.train.batch_size);
    EpochMetrics m;
    m.epoch = 0;
    m.split = "eval";
    m.loss = ev.loss;
    m.accuracy = ev.accuracy;
    m.spike_rate = ev.spike_rate;
    art.write("metrics.txt", metrics_line(m) + "\n");
}

std::string render_continual(const ContinualResult& r, const std::string& method) {
    std::ostringstream o;
    o << "method " << method << "\n";
    o << "branch " << (r.similar_branch ? "high_cb" : "low_cb") << "\n";
    o << "fid " << (r.fid ? format_double(*r.fid) : std::string("none")) << "\n";
    o << "benchmark " << format_double(r.old_acc_before) << "\n";
    for (auto& e : r.history)
        o << "epoch " << e.epoch << " new_loss " << format_double(e.new_train_loss)
          << " new_acc " << format_double(e.new_test_acc) << " old_acc "
          << format_double(e.old_test_acc) << "\n";
    o << "source " << format_double(r.old_acc_after) << " target "
      << format_double(r.new_acc_after) << " forgetting "
      << format_double(r.old_acc_after - r.old_acc_before) << "\n";
    return o.str();
}

void do_continual(const ExperimentConfig& cfg, ArtifactWriter& art) {
    if (cfg.dataset.type != "synth_pair")
        throw ConfigError("continual: dataset type must be synth_pair");
    bool near = cfg.dataset.pair == "near";
    if (!near && cfg.dataset.pair != "far")
        throw ConfigError("continual: pair must be near or far");
    SynthPair pair = synth_tasks(cfg.dataset.synth, near, cfg.model.time_steps,
                                 cfg.dataset.encoding);

    Model old_model = [&]() {
        if (!cfg.continual_old_checkpoint.empty())
            return load_checkpoint(cfg.continual_old_checkpoint);
        cfg.train.validate();
        Model m = build_model_for(cfg, pair.old_task);
        fit(m, pair.old_task.train, &pair.old_task.test, kDefaultTask, cfg.train);
        return m;
    }();
    if (cfg.continual_old_checkpoint.empty()) {
        std::map<std::string, std::string> meta{
            {"config_sha256", sha256_hex(cfg.canonical_text())},
            {"task", std::to_string(kDefaultTask)}};
        art.write("old_checkpoint.bin", checkpoint_to_bytes(old_model, meta));
    }

    ContinualSetup setup;
    setup.old_task = first_task(old_model);
    setup.new_task = setup.old_task + 1;
    setup.new_classes = pair.new_task.classes;
    setup.similarity = parse_similarity(cfg.lwf_similarity);

    ContinualResult res;
    if (cfg.lwf_method == "critical_path")
        res = critical_path_lwf(old_model, pair.old_task, pair.new_task, setup, cfg.lwf,
                                cfg.train);
    else if (cfg.lwf_method == "vanilla")
        res = vanilla_lwf(old_model, pair.old_task, pair.new_task, setup, cfg.lwf,
                          cfg.train);
    else
        throw ConfigError("continual: unknown method '" + cfg.lwf_method +
                          "' (critical_path|vanilla)");

    art.write("continual_report.txt", render_continual(res, cfg.lwf_method));
    std::map<std::string, std::string> meta{
        {"config_sha256", sha256_hex(cfg.canonical_text())},
        {"tasks", std::to_string(setup.old_task) + "," + std::to_string(setup.new_task)}};
    art.write("new_checkpoint.bin", checkpoint_to_bytes(res.model, meta));
}

void do_energy(const ExperimentConfig& cfg, ArtifactWriter& art) {
    if (cfg.energy.checkpoint.empty())
        throw ConfigError("energy: [energy] checkpoint is required");
    if (cfg.energy.e_mac_pj <= 0.0 || cfg.energy.e_sop_pj <= 0.0)
        throw ConfigError("energy: per-operation constants must be positive");
    Model model = load_checkpoint(cfg.energy.checkpoint);
    TaskData data = build_dataset(cfg.dataset, model.config.time_steps);
    std::vector<const Tensor*> frames;
    for (std::size_t i = 0; i < std::min<std::size_t>(cfg.energy.samples,
                                                      data.test.samples.size());
         ++i)
        frames.push_back(&data.test.samples[i].frames);
    EnergyReport rep = energy_report(model, frames, cfg.energy.e_sop_pj * 1e-12,
                                     cfg.energy.e_mac_pj * 1e-12);
    art.write("energy.txt", render_energy_report(rep));
}

void do_gradcheck(const ExperimentConfig& cfg, ArtifactWriter& art) {
    TaskData data = build_dataset(cfg.dataset, cfg.model.time_steps);
    Model model = build_model_for(cfg, data);
    if (data.train.samples.empty()) throw DataError("gradcheck: empty dataset");
    GradCheckReport rep = gradient_check(model, data.train.samples[0], kDefaultTask,
                                         cfg.gradcheck.samples, 1e-4, cfg.seed);
    std::ostringstream o;
    o << "checked " << rep.total_checked << "\n";
    o << "max_rel_err " << format_double(rep.max_rel_err) << "\n";
    o << "tolerance " << format_double(cfg.gradcheck.tolerance) << "\n";
    for (auto& g : rep.groups)
        o << "group " << g.path << " max_rel_err " << format_double(g.max_rel_err)
          << " checked " << g.checked << "\n";
    art.write("gradcheck.txt", o.str());
    if (rep.max_rel_err > cfg.gradcheck.tolerance)
        throw NumericError("gradient check failed: max relative error " +
                           format_double(rep.max_rel_err) + " exceeds tolerance " +
                           format_double(cfg.gradcheck.tolerance));
}

}  // namespace

TaskData build_dataset(const DatasetSpec& spec, uint32_t time_steps) {
    if (spec.type == "synth") {
        return make_synth_task(spec.synth, time_steps, spec.encoding);
    }
    if (spec.type == "idx") {
        if (spec.idx_train_images.empty() || spec.idx_train_labels.empty() ||
            spec.idx_test_images.empty() || spec.idx_test_labels.empty())
            throw ConfigError("dataset: idx type needs train/test image and label files");
        auto tr_img = load_idx_images(spec.idx_train_images);
        auto tr_lab = load_idx_labels(spec.idx_train_labels);
        auto te_img = load_idx_images(spec.idx_test_images);
        auto te_lab = load_idx_labels(spec.idx_test_labels);
        uint32_t classes = 0;
        for (uint32_t l : tr_lab) classes = std::max(classes, l + 1);
        for (uint32_t l : te_lab) classes = std::max(classes, l + 1);
        TaskData task;
        task.classes = classes;
        task.train = encode(tr_img, tr_lab, classes, time_steps, spec.encoding,
                            spec.synth.seed + 17);
        task.test = encode(te_img, te_lab, classes, time_steps, spec.encoding,
                           spec.synth.seed + 31);
        return task;
    }
    throw ConfigError("dataset: unknown type '" + spec.type + "' (synth|synth_pair|idx)");
}

EnergyReport energy_report(const Model& model, const std::vector<const Tensor*>& frames,
                           double e_sop_joules, double e_mac_joules) {
    if (e_sop_joules <= 0.0 || e_mac_joules <= 0.0)
        throw InvalidArgument("energy_report: constants must be positive");
    if (frames.empty()) throw InvalidArgument("energy_report: no samples");
    EnergyReport rep;
    rep.e_sop_joules = e_sop_joules;
    rep.e_mac_joules = e_mac_joules;
    rep.sample_count = uint32_t(frames.size());
    rep.time_steps = model.config.time_steps;

    auto run_side = [&](SkipGate gate) {
        Model m = model;
        m.config.gate = gate;
        ForwardStats st = m.statistics(frames);
        EnergySide side;
        side.gate = gate_name(gate);
        side.sop = st.ops.sop;
        side.mac = st.ops.mac;
        side.energy_joules = e_sop_joules * st.ops.sop + e_mac_joules * st.ops.mac;
        side.mean_rate = st.mean_rate();
        return side;
    };
    rep.own = run_side(model.config.gate);
    rep.or_side = model.config.gate == SkipGate::or_gate ? rep.own
                                                         : run_side(SkipGate::or_gate);
    rep.add_side = model.config.gate == SkipGate::add_gate ? rep.own
                                                           : run_side(SkipGate::add_gate);
    return rep;
}

std::string render_energy_report(const EnergyReport& r) {
    std::ostringstream o;
    o << "samples " << r.sample_count << "\n";
    o << "time_steps " << r.time_steps << "\n";
    o << "e_sop_pj " << format_double(r.e_sop_joules * 1e12) << "\n";
    o << "e_mac_pj " << format_double(r.e_mac_joules * 1e12) << "\n";
    auto side = [&](const EnergySide& s, const char* label) {
        o << label << " gate " << s.gate << " sop " << format_double(s.sop) << " mac "
          << format_double(s.mac) << " energy_mj " << format_double(s.energy_joules * 1e3)
          << " mean_rate " << format_double(s.mean_rate) << "\n";
    };
    side(r.own, "own");
    side(r.or_side, "or");
    side(r.add_side, "add");
    return o.str();
}

ManifestInfo parse_manifest(const std::string& text) {
    ManifestInfo info;
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || trim(line) != "cognisnn manifest v1")
        throw DataError("manifest: missing header");
    bool in_config = false;
    while (std::getline(in, line)) {
        if (in_config) {
            if (trim(line) == "config_end") {
                in_config = false;
                continue;
            }
            info.config_text += line + "\n";
            continue;
        }
        auto tok = split_ws(line);
        if (tok.empty()) continue;
        if (tok[0] == "subcommand" && tok.size() == 2) info.subcommand = tok[1];
        else if (tok[0] == "seed" && tok.size() == 2)
            info.seed = parse_u64(tok[1], "manifest seed");
        else if (tok[0] == "smooth_mode" && tok.size() == 2)
            info.smooth_mode = tok[1] == "1";
        else if (tok[0] == "config_sha256" && tok.size() == 2)
            info.config_sha256 = tok[1];
        else if (tok[0] == "config_begin")
            in_config = true;
        else if (tok[0] == "output" && tok.size() == 3)
            info.outputs.push_back({tok[1], tok[2]});
        else
            throw DataError("manifest: unrecognized line '" + line + "'");
    }
    return info;
}

void run_experiment_text(const std::string& subcommand, const std::string& config_text,
                         const std::string& out_dir, const RunOverrides& overrides) {
    ExperimentConfig cfg = ExperimentConfig::parse(config_text);
    if (overrides.seed) cfg.apply_seed_override(*overrides.seed);
    if (overrides.smooth_mode) cfg.train.smooth_mode = true;

    ArtifactWriter art(out_dir);
    if (subcommand == "generate-graph")
        do_generate_graph(cfg, art);
    else if (subcommand == "paths")
        do_paths(cfg, art);
    else if (subcommand == "train")
        do_train(cfg, art, overrides.smooth_mode);
    else if (subcommand == "eval")
        do_eval(cfg, art);
    else if (subcommand == "continual")
        do_continual(cfg, art);
    else if (subcommand == "energy")
        do_energy(cfg, art);
    else if (subcommand == "gradcheck") {
        // manifest written even when the check trips the tolerance
        try {
            do_gradcheck(cfg, art);
        } catch (const NumericError&) {
            art.finish(subcommand, cfg, overrides.smooth_mode);
            throw;
        }
    } else
        throw ConfigError("unknown subcommand '" + subcommand + "'");
    art.finish(subcommand, cfg, overrides.smooth_mode);
}

void run_experiment(const std::string& subcommand, const std::string& config_path,
                    const std::string& out_dir, const RunOverrides& overrides) {
    run_experiment_text(subcommand, read_file(config_path), out_dir, overrides);
}

}  // namespace cognisnn
