#include "cognisnn.h"

#include <cstring>
#include <string>

#include "cognisnn/experiment.hpp"
#include "cognisnn/topology.hpp"
#include "cognisnn/util.hpp"

namespace {

thread_local std::string g_last_error;

cogni_status status_of(const cognisnn::Error& e) {
    switch (e.kind()) {
    case cognisnn::ErrorKind::config: return COGNI_ERROR_CONFIG;
    case cognisnn::ErrorKind::data: return COGNI_ERROR_DATA;
    case cognisnn::ErrorKind::numeric: return COGNI_ERROR_NUMERIC;
    case cognisnn::ErrorKind::invalid_argument: return COGNI_ERROR_INVALID_ARGUMENT;
    case cognisnn::ErrorKind::capacity: return COGNI_ERROR_CAPACITY;
    case cognisnn::ErrorKind::dimension: return COGNI_ERROR_INVALID_ARGUMENT;
    case cognisnn::ErrorKind::internal: return COGNI_ERROR_INTERNAL;
    }
    return COGNI_ERROR_INTERNAL;
}

template <typename Fn>
cogni_status guarded(Fn&& fn) {
    try {
        fn();
        g_last_error.clear();
        return COGNI_OK;
    } catch (const cognisnn::Error& e) {
        g_last_error = e.what();
        return status_of(e);
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return COGNI_ERROR_INTERNAL;
    } catch (...) {
        g_last_error = "unknown error";
        return COGNI_ERROR_INTERNAL;
    }
}

}  // namespace

struct cogni_topology {
    cognisnn::DagTopology topo;
};

extern "C" {

const char* cogni_version(void) { return "1.0.0"; }

const char* cogni_last_error(void) { return g_last_error.c_str(); }

int cogni_status_exit_code(cogni_status status) {
    switch (status) {
    case COGNI_OK: return 0;
    case COGNI_ERROR_CONFIG:
    case COGNI_ERROR_INVALID_ARGUMENT:
    case COGNI_ERROR_CAPACITY:
        return 2;
    case COGNI_ERROR_DATA: return 3;
    default: return 4;
    }
}

cogni_status cogni_topology_generate_er(uint32_t nodes, double p, uint64_t seed,
                                        cogni_topology** out) {
    return guarded([&] {
        if (!out) throw cognisnn::InvalidArgument("null output handle");
        *out = new cogni_topology{cognisnn::generate_er(nodes, p, seed)};
    });
}

cogni_status cogni_topology_generate_ws(uint32_t nodes, uint32_t k, double p_rewire,
                                        uint64_t seed, cogni_topology** out) {
    return guarded([&] {
        if (!out) throw cognisnn::InvalidArgument("null output handle");
        *out = new cogni_topology{cognisnn::generate_ws(nodes, k, p_rewire, seed)};
    });
}

cogni_status cogni_topology_chain(uint32_t nodes, cogni_topology** out) {
    return guarded([&] {
        if (!out) throw cognisnn::InvalidArgument("null output handle");
        *out = new cogni_topology{cognisnn::make_chain(nodes)};
    });
}

cogni_status cogni_topology_load(const char* path, cogni_topology** out) {
    return guarded([&] {
        if (!out || !path) throw cognisnn::InvalidArgument("null argument");
        *out = new cogni_topology{
            cognisnn::DagTopology::from_text(cognisnn::read_file(path))};
    });
}

cogni_status cogni_topology_save(const cogni_topology* topo, const char* path) {
    return guarded([&] {
        if (!topo || !path) throw cognisnn::InvalidArgument("null argument");
        cognisnn::write_file_atomic(path, topo->topo.to_text());
    });
}

uint32_t cogni_topology_nodes(const cogni_topology* topo) {
    return topo ? topo->topo.node_count : 0;
}

uint32_t cogni_topology_edges(const cogni_topology* topo) {
    return topo ? uint32_t(topo->topo.edges.size()) : 0;
}

cogni_status cogni_topology_path_report(const cogni_topology* topo, uint64_t path_cap,
                                        char** report_out) {
    return guarded([&] {
        if (!topo || !report_out) throw cognisnn::InvalidArgument("null argument");
        cognisnn::PathRanking ranking = cognisnn::rank_paths(topo->topo, path_cap);
        std::string text = "TOTAL " + std::to_string(ranking.size()) + "\n";
        for (auto& [path, score] : ranking.entries) {
            text += "CB " + cognisnn::format_double(score) + " NODES";
            for (uint32_t v : path.nodes) text += " " + std::to_string(v);
            text += "\n";
        }
        char* buf = new char[text.size() + 1];
        std::memcpy(buf, text.c_str(), text.size() + 1);
        *report_out = buf;
    });
}

void cogni_topology_free(cogni_topology* topo) { delete topo; }

void cogni_string_free(char* s) { delete[] s; }

cogni_status cogni_run(const char* subcommand, const char* config_path,
                       const char* out_dir, const char* seed_override, int smooth_mode) {
    return guarded([&] {
        if (!subcommand || !config_path || !out_dir)
            throw cognisnn::InvalidArgument("null argument");
        cognisnn::RunOverrides ov;
        if (seed_override)
            ov.seed = cognisnn::parse_u64(seed_override, "seed override");
        ov.smooth_mode = smooth_mode != 0;
        cognisnn::run_experiment(subcommand, config_path, out_dir, ov);
    });
}

}  // extern "C"
