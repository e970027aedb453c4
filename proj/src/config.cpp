#include "dpoly/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dpoly {

std::string format_g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::vector<long> parse_long_list(const std::string& s) {
  std::vector<long> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    out.push_back(std::stol(tok));
  }
  if (out.empty()) throw std::invalid_argument("expected a comma-separated integer list");
  return out;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "command") command = value;
  else if (key == "seed") seed = std::stoull(value);
  else if (key == "workers") workers = std::stoi(value);
  else if (key == "N") N_list = parse_long_list(value);
  else if (key == "h") h = std::stoi(value);
  else if (key == "beta_hat") beta_hat = std::stod(value);
  else if (key == "law") law = value;
  else if (key == "replicas") replicas = std::stoull(value);
  else if (key == "out") out = value;
  else if (key == "box_mode") box_mode = value;
  else if (key == "box_factor") box_factor = std::stod(value);
  else extra[key] = value;
}

std::string RunConfig::get_extra(const std::string& key, const std::string& fallback) const {
  const auto it = extra.find(key);
  return it == extra.end() ? fallback : it->second;
}

void RunConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("malformed config line (expected key=value): " + line);
    std::string key = line.substr(0, eq), val = line.substr(eq + 1);
    auto strip = [](std::string& s) {
      while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.erase(s.begin());
      while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.pop_back();
    };
    strip(key);
    strip(val);
    set(key, val);
  }
}

RunConfig RunConfig::from_file(const std::string& path) {
  RunConfig cfg;
  cfg.load_file(path);
  return cfg;
}

std::string RunConfig::to_kv() const {
  std::string s;
  s += "command=" + command + "\n";
  s += "seed=" + std::to_string(seed) + "\n";
  s += "workers=" + std::to_string(workers) + "\n";
  s += "N=";
  for (std::size_t i = 0; i < N_list.size(); ++i)
    s += (i ? "," : "") + std::to_string(N_list[i]);
  s += "\n";
  s += "h=" + std::to_string(h) + "\n";
  s += "beta_hat=" + format_g17(beta_hat) + "\n";
  s += "law=" + law + "\n";
  s += "replicas=" + std::to_string(replicas) + "\n";
  s += "out=" + out + "\n";
  s += "box_mode=" + box_mode + "\n";
  s += "box_factor=" + format_g17(box_factor) + "\n";
  for (const auto& [k, v] : extra) s += k + "=" + v + "\n";
  return s;
}

std::string RunConfig::csv_header() const {
  // the worker count is an execution detail: outputs are byte-identical
  // regardless of the pool size, so it stays out of the embedded config
  std::string s = std::string("# ") + kVersion + "\n";
  std::stringstream kv(to_kv());
  std::string line;
  while (std::getline(kv, line)) {
    if (line.rfind("workers=", 0) == 0 || line.rfind("out=", 0) == 0) continue;
    s += "# " + line + "\n";
  }
  return s;
}

void RunConfig::validate() const {
  if (h < 0 || h > 8) throw std::invalid_argument("config: h out of range");
  if (beta_hat < 0.0 || beta_hat >= 1.0)
    throw std::invalid_argument("config: beta_hat must lie in [0,1)");
  if (law != "gaussian" && law != "rademacher")
    throw std::invalid_argument("config: law must be gaussian or rademacher");
  if (box_mode != "exact" && box_mode != "scaled")
    throw std::invalid_argument("config: box_mode must be exact or scaled");
  if (replicas == 0) throw std::invalid_argument("config: replicas must be positive");
  for (long n : N_list)
    if (n < 1) throw std::invalid_argument("config: horizons must be >= 1");
}

}  // namespace dpoly
