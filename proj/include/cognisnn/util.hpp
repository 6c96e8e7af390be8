#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace cognisnn {

// Static-partition parallel loop. Work items must be independent (each index
// writes only its own outputs), which keeps results identical for any thread
// count. Thread count comes from COGNISNN_THREADS or hardware concurrency.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);
unsigned thread_count();

std::string sha256_hex(const void* bytes, std::size_t len);
std::string sha256_hex(const std::string& s);

// %.17g formatting: round-trips doubles and is byte-stable across runs
std::string format_double(double v);

std::string read_file(const std::string& path);
void write_file_atomic(const std::string& path, const std::string& content);
bool file_exists(const std::string& path);

std::string trim(const std::string& s);
std::vector<std::string> split_ws(const std::string& s);

uint64_t parse_u64(const std::string& s, const std::string& what);
double parse_double(const std::string& s, const std::string& what);

}  // namespace cognisnn
