#pragma once

#include <filesystem>
#include <string>

#include "mtd/grid.hpp"

namespace mtd_test {

inline std::filesystem::path data_dir() { return MTD_DATA_DIR; }

inline mtd::GridCase load_case(const std::string& name) {
  return mtd::load_case_file(data_dir() / name);
}

inline const char* kTwoBus =
    "bus 1 0\n"
    "bus 2 100\n"
    "branch 1 2 0.5 200 0\n"
    "gen 1 0 150 10\n"
    "ref 2\n"
    "dfacts_eta 0\n";

}  // namespace mtd_test
