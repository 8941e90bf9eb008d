#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "mtd/eval.hpp"

namespace mtd {

// Fixed numeric formatting so identical runs produce byte-identical files.
std::string csv_num(double v);

// Minimal RFC-4180 writer: fields containing comma, quote or newline are
// quoted, everything else passes through.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);
  void row(const std::vector<std::string>& fields);
  void close();

 private:
  std::ofstream out_;
};

std::uint64_t fnv1a64(const void* data, std::size_t size);
std::string file_digest(const std::filesystem::path& path);

struct RunManifest {
  std::string command;
  std::map<std::string, std::string> config;
  std::map<std::string, std::string> input_digests;  // path -> digest
  std::uint64_t seed = 0;
  std::vector<std::string> outputs;
  double wall_seconds = 0.0;
};

void write_manifest(const RunManifest& manifest, const std::filesystem::path& path);

// Flat key=value configuration mirroring EvalConfig; '#' comments allowed.
// Grids accept comma lists ("0,0.05,0.1") or ranges ("0:0.05:0.45").
EvalConfig parse_config_text(std::string_view text, const EvalConfig& defaults = {});
EvalConfig load_config_file(const std::filesystem::path& path,
                            const EvalConfig& defaults = {});

std::vector<double> parse_grid_spec(const std::string& spec);

std::map<std::string, std::string> config_to_map(const EvalConfig& cfg);

}  // namespace mtd
