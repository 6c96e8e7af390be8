#include <doctest.h>

#include <cstring>
#include <string>

#include "cognisnn.h"
#include "cognisnn/util.hpp"
#include "support.hpp"

using testsupport::temp_dir;

TEST_CASE("capi: version and error-code mapping") {
    CHECK(std::string(cogni_version()) == "1.0.0");
    CHECK(cogni_status_exit_code(COGNI_OK) == 0);
    CHECK(cogni_status_exit_code(COGNI_ERROR_CONFIG) == 2);
    CHECK(cogni_status_exit_code(COGNI_ERROR_INVALID_ARGUMENT) == 2);
    CHECK(cogni_status_exit_code(COGNI_ERROR_DATA) == 3);
    CHECK(cogni_status_exit_code(COGNI_ERROR_NUMERIC) == 4);
    CHECK(cogni_status_exit_code(COGNI_ERROR_INTERNAL) == 4);
}

TEST_CASE("capi: topology handles round trip through files") {
    cogni_topology* topo = nullptr;
    REQUIRE(cogni_topology_generate_er(7, 0.6, 42, &topo) == COGNI_OK);
    REQUIRE(topo != nullptr);
    CHECK(cogni_topology_nodes(topo) == 7);
    CHECK(cogni_topology_edges(topo) > 0);

    std::string dir = temp_dir("capi");
    std::string path = dir + "/topo.txt";
    REQUIRE(cogni_topology_save(topo, path.c_str()) == COGNI_OK);

    cogni_topology* loaded = nullptr;
    REQUIRE(cogni_topology_load(path.c_str(), &loaded) == COGNI_OK);
    CHECK(cogni_topology_nodes(loaded) == cogni_topology_nodes(topo));
    CHECK(cogni_topology_edges(loaded) == cogni_topology_edges(topo));
    cogni_topology_free(topo);
    cogni_topology_free(loaded);
}

TEST_CASE("capi: invalid arguments set the thread-local error") {
    cogni_topology* topo = nullptr;
    cogni_status st = cogni_topology_generate_er(1, 0.5, 0, &topo);
    CHECK(st == COGNI_ERROR_INVALID_ARGUMENT);
    CHECK(std::strlen(cogni_last_error()) > 0);

    st = cogni_topology_load("/nonexistent/file.txt", &topo);
    CHECK(st == COGNI_ERROR_DATA);
    CHECK(cogni_status_exit_code(st) == 3);
}

TEST_CASE("capi: path report lists the diamond ranking") {
    std::string dir = temp_dir("capipaths");
    std::string text = "N 4\nGEN custom\nSEED 0\nE 0 1\nE 0 2\nE 1 3\nE 2 3\n";
    cognisnn::write_file_atomic(dir + "/diamond.txt", text);
    cogni_topology* topo = nullptr;
    REQUIRE(cogni_topology_load((dir + "/diamond.txt").c_str(), &topo) == COGNI_OK);
    char* report = nullptr;
    REQUIRE(cogni_topology_path_report(topo, 1000, &report) == COGNI_OK);
    std::string rep(report);
    CHECK(rep.find("TOTAL 2") != std::string::npos);
    CHECK(rep.find("NODES 0 1 3") != std::string::npos);
    cogni_string_free(report);
    cogni_topology_free(topo);
}

TEST_CASE("capi: cogni_run drives a whole subcommand") {
    std::string dir = temp_dir("capirun");
    std::string config =
        "[topology]\ngenerator = er\nnodes = 5\nedge_prob = 0.5\nseed = 9\n";
    cognisnn::write_file_atomic(dir + "/config.ini", config);
    cogni_status st = cogni_run("generate-graph", (dir + "/config.ini").c_str(),
                                (dir + "/out").c_str(), "123", 0);
    REQUIRE(st == COGNI_OK);
    CHECK(cognisnn::file_exists(dir + "/out/topology.txt"));
    CHECK(cognisnn::file_exists(dir + "/out/manifest.txt"));

    // bad config -> config error; missing file -> data error
    cognisnn::write_file_atomic(dir + "/bad.ini", "[model]\nnot_a_key = 1\n");
    CHECK(cogni_run("generate-graph", (dir + "/bad.ini").c_str(),
                    (dir + "/out2").c_str(), nullptr, 0) == COGNI_ERROR_CONFIG);
    CHECK(cogni_run("train", (dir + "/missing.ini").c_str(), (dir + "/out3").c_str(),
                    nullptr, 0) == COGNI_ERROR_DATA);
    CHECK(cogni_run(nullptr, "x", "y", nullptr, 0) == COGNI_ERROR_INVALID_ARGUMENT);
}
