// CLI for the CogniSNN engine; talks to the core through the C API only.

#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "cognisnn.h"

namespace {

struct CommonArgs {
    std::string config;
    std::string out = "out";
    std::string seed;  // empty = no override
    bool smooth_mode = false;
};

void add_common(CLI::App* sub, CommonArgs& args, bool config_required = true) {
    auto* c = sub->add_option("--config", args.config, "experiment config file");
    if (config_required) c->required();
    sub->add_option("--out", args.out, "output directory (default: out)");
    sub->add_option("--seed", args.seed, "master seed override (u64)");
    sub->add_flag("--smooth-mode", args.smooth_mode,
                  "use the smooth surrogate forward (gradient checks)");
}

std::string json_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        case '\n': out += "\\n"; break;
        case '\t': out += "\\t"; break;
        default: out += c;
        }
    }
    return out;
}

int dispatch(const std::string& name, const CommonArgs& args) {
    cogni_status status =
        cogni_run(name.c_str(), args.config.c_str(), args.out.c_str(),
                  args.seed.empty() ? nullptr : args.seed.c_str(),
                  args.smooth_mode ? 1 : 0);
    if (status == COGNI_OK) return 0;
    std::fprintf(stderr, "{\"error\":{\"status\":%d,\"subcommand\":\"%s\",\"message\":\"%s\"}}\n",
                 int(status), json_escape(name).c_str(),
                 json_escape(cogni_last_error()).c_str());
    return cogni_status_exit_code(status);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"CogniSNN: random-graph spiking network engine"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(cogni_version()));

    const char* names[] = {"generate-graph", "train",  "eval",     "paths",
                           "continual",      "energy", "gradcheck"};
    const char* descs[] = {
        "sample a topology and write its text form",
        "train a model on the configured dataset",
        "evaluate a checkpoint on the configured dataset",
        "enumerate source->sink paths ranked by betweenness",
        "two-task continual-learning run (critical-path or vanilla LwF)",
        "spike statistics and energy estimate for a checkpoint",
        "finite-difference gradient check in smooth mode",
    };

    CommonArgs args[7];
    for (int i = 0; i < 7; ++i) {
        CLI::App* sub = app.add_subcommand(names[i], descs[i]);
        add_common(sub, args[i]);
    }

    CLI11_PARSE(app, argc, argv);

    for (int i = 0; i < 7; ++i)
        if (app.get_subcommand(std::string(names[i]))->parsed())
            return dispatch(names[i], args[i]);
    return 2;
}
