#include "mtd/io.hpp"

#include <cstdio>
#include <sstream>

#include <nlohmann/json.hpp>

namespace mtd {

std::string csv_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

CsvWriter::CsvWriter(const std::filesystem::path& path,
                     const std::vector<std::string>& header) {
  out_.open(path, std::ios::binary | std::ios::trunc);
  if (!out_) throw ParseError(0, "cannot open output file: " + path.string());
  row(header);
}

void CsvWriter::row(const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out_ << ',';
    const std::string& f = fields[i];
    if (f.find_first_of(",\"\n") != std::string::npos) {
      out_ << '"';
      for (char c : f) {
        if (c == '"') out_ << '"';
        out_ << c;
      }
      out_ << '"';
    } else {
      out_ << f;
    }
  }
  out_ << "\r\n";
}

void CsvWriter::close() { out_.close(); }

std::uint64_t fnv1a64(const void* data, std::size_t size) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < size; ++i) {
    hash ^= bytes[i];
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::string file_digest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(0, "cannot open file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string data = buf.str();
  char out[20];
  std::snprintf(out, sizeof out, "%016llx",
                static_cast<unsigned long long>(fnv1a64(data.data(), data.size())));
  return out;
}

void write_manifest(const RunManifest& manifest, const std::filesystem::path& path) {
  nlohmann::json j;
  j["command"] = manifest.command;
  j["config"] = manifest.config;
  j["inputs"] = manifest.input_digests;
  j["seed"] = manifest.seed;
  j["outputs"] = manifest.outputs;
  j["wall_seconds"] = manifest.wall_seconds;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ParseError(0, "cannot open output file: " + path.string());
  out << j.dump(2) << '\n';
}

std::vector<double> parse_grid_spec(const std::string& spec) {
  std::vector<double> out;
  if (spec.find(':') != std::string::npos) {
    double lo = 0, step = 0, hi = 0;
    if (std::sscanf(spec.c_str(), "%lf:%lf:%lf", &lo, &step, &hi) != 3 || step <= 0.0)
      throw ParseError(0, "bad grid spec '" + spec + "' (want lo:step:hi)");
    for (double v = lo; v <= hi + 1e-12; v += step) out.push_back(v);
    return out;
  }
  std::istringstream in(spec);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    if (tok.empty()) continue;
    out.push_back(std::stod(tok));
  }
  if (out.empty()) throw ParseError(0, "empty grid spec");
  return out;
}

EvalConfig parse_config_text(std::string_view text, const EvalConfig& defaults) {
  EvalConfig cfg = defaults;
  std::istringstream stream{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(stream, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    std::string line = hash == std::string::npos ? raw : raw.substr(0, hash);
    const auto eq = line.find('=');
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (eq == std::string::npos)
      throw ParseError(line_no, "expected key=value");
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      if (key == "n_attacks") cfg.n_attacks = std::stoi(value);
      else if (key == "n_noise") cfg.n_noise = std::stoi(value);
      else if (key == "alpha") cfg.alpha = std::stod(value);
      else if (key == "rel_magnitude") cfg.rel_magnitude = std::stod(value);
      else if (key == "deltas") cfg.deltas = parse_grid_spec(value);
      else if (key == "gammas") cfg.gammas = parse_grid_spec(value);
      else if (key == "noise_sigma") cfg.noise_sigma = std::stod(value);
      else if (key == "weighted_residual") cfg.weighted_residual = std::stoi(value) != 0;
      else if (key == "seed") cfg.seed = std::stoull(value);
      else if (key == "restarts") cfg.restarts = std::stoi(value);
      else if (key == "calib_trials") cfg.calib_trials = std::stoi(value);
      else if (key == "threads") cfg.threads = std::stoi(value);
      else if (key == "attacker_knowledge") {
        if (value == "baseline") cfg.attacker_knowledge = AttackerKnowledge::PreviousBaseline;
        else if (value == "post_mtd") cfg.attacker_knowledge = AttackerKnowledge::PreviousPostMtd;
        else throw ParseError(line_no, "attacker_knowledge must be baseline or post_mtd");
      } else {
        throw ParseError(line_no, "unknown config key '" + key + "'");
      }
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception&) {
      throw ParseError(line_no, "bad value for '" + key + "'");
    }
  }
  cfg.validate();
  return cfg;
}

EvalConfig load_config_file(const std::filesystem::path& path, const EvalConfig& defaults) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(0, "cannot open file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), defaults);
}

std::map<std::string, std::string> config_to_map(const EvalConfig& cfg) {
  std::map<std::string, std::string> m;
  m["n_attacks"] = std::to_string(cfg.n_attacks);
  m["n_noise"] = std::to_string(cfg.n_noise);
  m["alpha"] = csv_num(cfg.alpha);
  m["rel_magnitude"] = csv_num(cfg.rel_magnitude);
  std::string deltas, gammas;
  for (double d : cfg.deltas) deltas += (deltas.empty() ? "" : ",") + csv_num(d);
  for (double g : cfg.gammas) gammas += (gammas.empty() ? "" : ",") + csv_num(g);
  m["deltas"] = deltas;
  m["gammas"] = gammas;
  m["noise_sigma"] = csv_num(cfg.noise_sigma);
  m["weighted_residual"] = cfg.weighted_residual ? "1" : "0";
  m["seed"] = std::to_string(cfg.seed);
  m["restarts"] = std::to_string(cfg.restarts);
  m["calib_trials"] = std::to_string(cfg.calib_trials);
  m["threads"] = std::to_string(cfg.threads);
  m["attacker_knowledge"] =
      cfg.attacker_knowledge == AttackerKnowledge::PreviousBaseline ? "baseline"
                                                                    : "post_mtd";
  return m;
}

}  // namespace mtd
