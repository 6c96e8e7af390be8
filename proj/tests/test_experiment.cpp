#include <doctest.h>

#include <random>

#include "cognisnn/checkpoint.hpp"
#include "cognisnn/experiment.hpp"
#include "cognisnn/util.hpp"
#include "support.hpp"

using namespace cognisnn;
using namespace testsupport;

namespace {

const char* kTinyTrainConfig = R"(
[experiment]
seed = 5

[topology]
generator = er
nodes = 4
edge_prob = 0.5

[model]
channels = 3
time_steps = 2

[dataset]
type = synth
classes = 2
image_size = 8
train_per_class = 6
test_per_class = 3
noise = 0.02

[train]
epochs = 1
batch_size = 4
)";

}  // namespace

TEST_CASE("config: parse, defaults, and canonical round trip") {
    ExperimentConfig cfg = ExperimentConfig::parse(kTinyTrainConfig);
    CHECK(cfg.seed == 5);
    CHECK(cfg.topology.nodes == 4);
    CHECK(cfg.model.channels == 3);
    CHECK(cfg.model.neuron.tau == 2.0);   // default
    CHECK(cfg.train.lr == 1e-3);          // default
    CHECK(cfg.topology.seed == 1005);     // derived from master
    CHECK(cfg.dataset.synth.seed == 2005);
    CHECK(cfg.train.seed == 3005);
    CHECK(cfg.model.image_size == 8);  // follows the dataset image size

    std::string canon = cfg.canonical_text();
    ExperimentConfig back = ExperimentConfig::parse(canon);
    CHECK(back.canonical_text() == canon);
}

TEST_CASE("config: unknown keys and sections fail fast") {
    CHECK_THROWS_AS(ExperimentConfig::parse("[nope]\nx = 1\n"), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::parse("[model]\nbogus_key = 1\n"), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::parse("key_without_section = 1\n"), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::parse("[model]\nchannels = abc\n"), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::parse("[model]\nchannels = 4\nchannels = 5\n"),
                    ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::parse("[model]\ngate = xor\n"), ConfigError);
}

TEST_CASE("config: seed override re-derives section seeds") {
    ExperimentConfig cfg = ExperimentConfig::parse(kTinyTrainConfig);
    cfg.apply_seed_override(42);
    CHECK(cfg.seed == 42);
    CHECK(cfg.topology.seed == 1042);
    CHECK(cfg.train.seed == 3042);
}

TEST_CASE("run: paths subcommand on the diamond fixture") {
    std::string dir = temp_dir("paths");
    DagTopology diamond;
    diamond.node_count = 4;
    diamond.edges = {{0, 1}, {0, 2}, {1, 3}, {2, 3}};
    write_file_atomic(dir + "/diamond.txt", diamond.to_text());

    std::string config = "[topology]\ngenerator = file\nfile = " + dir +
                         "/diamond.txt\n";
    RunOverrides ov;
    run_experiment_text("paths", config, dir + "/out", ov);

    std::string paths = read_file(dir + "/out/paths.txt");
    CHECK(paths.find("TOTAL 2") != std::string::npos);
    CHECK(paths.find("CB 3.5 NODES 0 1 3") != std::string::npos);
    CHECK(paths.find("CB 3.5 NODES 0 2 3") != std::string::npos);
    CHECK(file_exists(dir + "/out/manifest.txt"));
}

TEST_CASE("run: train twice gives identical manifest hashes") {
    std::string dir = temp_dir("repro");
    RunOverrides ov;
    run_experiment_text("train", kTinyTrainConfig, dir + "/a", ov);
    run_experiment_text("train", kTinyTrainConfig, dir + "/b", ov);
    ManifestInfo ma = parse_manifest(read_file(dir + "/a/manifest.txt"));
    ManifestInfo mb = parse_manifest(read_file(dir + "/b/manifest.txt"));
    REQUIRE(!ma.outputs.empty());
    CHECK(ma.outputs == mb.outputs);
    CHECK(ma.config_sha256 == mb.config_sha256);

    // and the manifest carries enough to rerun: config text matches the hash
    CHECK(sha256_hex(ma.config_text) == ma.config_sha256);
}

TEST_CASE("run: unknown subcommand is a config error") {
    std::string dir = temp_dir("badsub");
    CHECK_THROWS_AS(run_experiment_text("frobnicate", kTinyTrainConfig, dir, {}),
                    ConfigError);
}

TEST_CASE("energy report: silent network burns only dense MACs") {
    DagTopology t = make_chain(2);
    ModelConfig cfg = small_config(2, 2, 8, 32);
    Model m = Model::build(t, cfg, 3);
    m.add_head(0, 2);
    // zero stem conv => no spikes anywhere
    Tensor& w = m.params.at("stem.conv.weight");
    std::fill(w.data.begin(), w.data.end(), 0.0);
    Tensor frames = Tensor::full({2, 1, 8, 8}, 0.7);

    ForwardStats st = m.statistics({&frames});
    CHECK(st.ops.sop == 0.0);
    // dense inventory: stem conv is T*C*H*W*Cin*9; aggregation is one MAC per
    // element per edge per step
    double stem = 2.0 * 2 * 8 * 8 * 1 * 9;
    double agg = 2.0 * 2 * 8 * 8 * 1;
    CHECK(st.ops.mac == doctest::Approx(stem + agg).epsilon(1e-12));

    EnergyReport rep = energy_report(m, {&frames}, 0.9e-12, 4.6e-12);
    CHECK(rep.own.sop == 0.0);
    CHECK(rep.own.energy_joules ==
          doctest::Approx(4.6e-12 * rep.own.mac).epsilon(1e-12));
    CHECK_THROWS_AS(energy_report(m, {&frames}, 0.0, 1.0), InvalidArgument);
}

TEST_CASE("energy report: doubling T doubles the stem MAC count") {
    DagTopology t = make_chain(2);
    auto stem_macs = [&](uint32_t T) {
        ModelConfig cfg = small_config(2, T, 8, 32);
        Model m = Model::build(t, cfg, 3);
        Tensor& w = m.params.at("stem.conv.weight");
        std::fill(w.data.begin(), w.data.end(), 0.0);
        Tensor frames = Tensor::full({T, 1, 8, 8}, 0.7);
        ForwardStats st = m.statistics({&frames});
        // silent net: mac = stem + aggregation, both linear in T
        return st.ops.mac;
    };
    CHECK(stem_macs(4) == doctest::Approx(2.0 * stem_macs(2)).epsilon(1e-12));
}

TEST_CASE("energy report: SOP count equals the statistics recount") {
    DagTopology t = generate_er(4, 0.6, 5);
    ModelConfig cfg = small_config(3, 2, 8, 32);
    Model m = Model::build(t, cfg, 6);
    m.add_head(0, 2);
    std::mt19937_64 rng(7);
    Tensor frames = random_binary({2, 1, 8, 8}, rng);
    EnergyReport rep = energy_report(m, {&frames}, 0.9e-12, 4.6e-12);
    ForwardStats st = m.statistics({&frames});
    CHECK(rep.own.sop == st.ops.sop);
    CHECK(rep.own.mac == st.ops.mac);
    CHECK(rep.or_side.sop == st.ops.sop);  // model's own gate is OR
}

TEST_CASE("manifest parser rejects junk") {
    CHECK_THROWS_AS(parse_manifest("not a manifest\n"), DataError);
    ManifestInfo info = parse_manifest(
        "cognisnn manifest v1\nsubcommand train\nseed 7\nsmooth_mode 0\n"
        "config_sha256 abc\nconfig_begin\n[model]\nconfig_end\noutput a.txt ff\n");
    CHECK(info.subcommand == "train");
    CHECK(info.seed == 7);
    CHECK(info.outputs.size() == 1);
    CHECK(info.config_text == "[model]\n");
}

TEST_CASE("run: eval, energy, and gradcheck consume a trained checkpoint") {
    std::string dir = temp_dir("subcmds");
    RunOverrides ov;
    run_experiment_text("train", kTinyTrainConfig, dir + "/train", ov);
    REQUIRE(file_exists(dir + "/train/checkpoint.bin"));

    std::string eval_config = std::string(kTinyTrainConfig) + "\n[eval]\ncheckpoint = " +
                              dir + "/train/checkpoint.bin\n";
    run_experiment_text("eval", eval_config, dir + "/eval", ov);
    std::string metrics = read_file(dir + "/eval/metrics.txt");
    CHECK(metrics.find("split=eval") != std::string::npos);

    std::string energy_config = std::string(kTinyTrainConfig) +
                                "\n[energy]\nsamples = 4\ncheckpoint = " + dir +
                                "/train/checkpoint.bin\n";
    run_experiment_text("energy", energy_config, dir + "/energy", ov);
    std::string energy = read_file(dir + "/energy/energy.txt");
    CHECK(energy.find("gate or") != std::string::npos);
    CHECK(energy.find("gate add") != std::string::npos);

    std::string grad_config = std::string(kTinyTrainConfig) +
                              "\n[gradcheck]\nsamples = 24\ntolerance = 0.0001\n";
    run_experiment_text("gradcheck", grad_config, dir + "/grad", ov);
    std::string report = read_file(dir + "/grad/gradcheck.txt");
    CHECK(report.find("max_rel_err") != std::string::npos);
    CHECK(file_exists(dir + "/grad/manifest.txt"));

    // eval without a checkpoint is a config error
    CHECK_THROWS_AS(run_experiment_text("eval", kTinyTrainConfig, dir + "/bad", ov),
                    ConfigError);
}

TEST_CASE("run: continual subcommand produces the table-style report") {
    std::string dir = temp_dir("continual");
    std::string config = R"(
[experiment]
seed = 9

[topology]
generator = er
nodes = 4
edge_prob = 0.5

[model]
channels = 3
time_steps = 2
eta = 32

[dataset]
type = synth_pair
pair = near
classes = 2
image_size = 8
train_per_class = 8
test_per_class = 4
noise = 0.02

[train]
epochs = 1
batch_size = 4

[lwf]
epochs = 1
similarity = similar
method = critical_path
)";
    RunOverrides ov;
    run_experiment_text("continual", config, dir + "/out", ov);
    std::string report = read_file(dir + "/out/continual_report.txt");
    CHECK(report.find("method critical_path") != std::string::npos);
    CHECK(report.find("branch high_cb") != std::string::npos);
    CHECK(report.find("benchmark ") != std::string::npos);
    CHECK(report.find("source ") != std::string::npos);
    CHECK(report.find("target ") != std::string::npos);
    CHECK(file_exists(dir + "/out/new_checkpoint.bin"));
    CHECK(file_exists(dir + "/out/old_checkpoint.bin"));

    // the produced checkpoint reloads with both heads registered
    Model plus = load_checkpoint(dir + "/out/new_checkpoint.bin");
    CHECK(plus.heads.size() == 2);
}
