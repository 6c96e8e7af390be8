#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cognisnn/config.hpp"
#include "cognisnn/network.hpp"

namespace cognisnn {

struct RunOverrides {
    std::optional<uint64_t> seed;
    bool smooth_mode = false;
};

// Executes one subcommand (generate-graph | train | eval | paths | continual |
// energy | gradcheck). Artifacts and a manifest land under out_dir; failures
// raise typed errors that map onto the CLI exit codes.
void run_experiment(const std::string& subcommand, const std::string& config_path,
                    const std::string& out_dir, const RunOverrides& overrides);
void run_experiment_text(const std::string& subcommand, const std::string& config_text,
                         const std::string& out_dir, const RunOverrides& overrides);

struct ManifestInfo {
    std::string subcommand;
    uint64_t seed = 0;
    bool smooth_mode = false;
    std::string config_sha256;
    std::string config_text;
    std::vector<std::pair<std::string, std::string>> outputs;  // name -> sha256
};

ManifestInfo parse_manifest(const std::string& text);

// build the encoded train/test split named by a dataset spec
TaskData build_dataset(const DatasetSpec& spec, uint32_t time_steps);

struct EnergySide {
    std::string gate;
    double sop = 0.0;
    double mac = 0.0;
    double energy_joules = 0.0;
    double mean_rate = 0.0;
};

// spike counts and the SOP/MAC energy estimate for the model's weights under
// its own gate and under the OR/ADD alternatives
struct EnergyReport {
    double e_sop_joules = 0.0;
    double e_mac_joules = 0.0;
    uint32_t sample_count = 0;
    uint32_t time_steps = 0;
    EnergySide own;
    EnergySide or_side;
    EnergySide add_side;
};

EnergyReport energy_report(const Model& model, const std::vector<const Tensor*>& frames,
                           double e_sop_joules, double e_mac_joules);
std::string render_energy_report(const EnergyReport& r);

}  // namespace cognisnn
