// Copyright 2026 The AdaScale Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// File formats: flat key-value config with typed sections, channel-trace CSV
// with a JSON header line, per-round run CSV, and sweep reports. All floats
// are serialized with 17 significant digits so emit/load round-trips are
// value-exact.

#ifndef ADASCALE_IO_HPP
#define ADASCALE_IO_HPP

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "adascale/experiment.hpp"

namespace adascale {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace detail {

struct ConfigParser {
  std::map<std::string, std::string> entries;  // "section.key" -> value
  std::vector<std::string> errors;
  std::vector<std::string> consumed;

  void load_text(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return std::string();
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
      };
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[' && line.back() == ']') {
        section = trim(line.substr(1, line.size() - 2));
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        errors.push_back("line " + std::to_string(lineno) +
                         ": expected key = value");
        continue;
      }
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      if (section.empty()) {
        errors.push_back("line " + std::to_string(lineno) +
                         ": key outside any [section]");
        continue;
      }
      entries[section + "." + key] = value;
    }
  }

  std::string raw(const std::string& name) {
    auto it = entries.find(name);
    if (it == entries.end()) {
      errors.push_back("missing key: " + name);
      return {};
    }
    consumed.push_back(name);
    return it->second;
  }

  void read(const std::string& name, double* out) {
    const std::string v = raw(name);
    if (v.empty()) return;
    try {
      std::size_t pos = 0;
      *out = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
    } catch (const std::exception&) {
      errors.push_back("key " + name + ": expected a real number, got '" + v + "'");
    }
  }
  void read(const std::string& name, int* out) {
    const std::string v = raw(name);
    if (v.empty()) return;
    try {
      std::size_t pos = 0;
      *out = std::stoi(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
    } catch (const std::exception&) {
      errors.push_back("key " + name + ": expected an integer, got '" + v + "'");
    }
  }
  void read(const std::string& name, std::uint64_t* out) {
    const std::string v = raw(name);
    if (v.empty()) return;
    try {
      std::size_t pos = 0;
      *out = std::stoull(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
    } catch (const std::exception&) {
      errors.push_back("key " + name + ": expected an unsigned integer, got '" +
                       v + "'");
    }
  }
  void read(const std::string& name, std::string* out) {
    const std::string v = raw(name);
    if (!v.empty()) *out = v;
  }
  void read(const std::string& name, std::vector<double>* out) {
    const std::string v = raw(name);
    if (v.empty()) return;
    out->clear();
    std::istringstream items(v);
    std::string item;
    while (std::getline(items, item, ',')) {
      try {
        std::size_t pos = 0;
        out->push_back(std::stod(item, &pos));
        if (pos != item.size()) throw std::invalid_argument(item);
      } catch (const std::exception&) {
        errors.push_back("key " + name + ": bad list element '" + item + "'");
        return;
      }
    }
    if (out->empty()) errors.push_back("key " + name + ": empty list");
  }
  void read(const std::string& name, std::vector<std::string>* out) {
    const std::string v = raw(name);
    if (v.empty()) return;
    out->clear();
    std::istringstream items(v);
    std::string item;
    while (std::getline(items, item, ',')) out->push_back(item);
    if (out->empty()) errors.push_back("key " + name + ": empty list");
  }

  void finish(const std::string& what) {
    for (const auto& [name, value] : entries) {
      if (std::find(consumed.begin(), consumed.end(), name) == consumed.end()) {
        errors.push_back("unknown key: " + name);
      }
    }
    if (!errors.empty()) {
      std::string msg = what + " has " + std::to_string(errors.size()) +
                        " problem(s):";
      for (const auto& e : errors) msg += "\n  - " + e;
      throw std::runtime_error(msg);
    }
  }
};

}  // namespace detail

// Parses the flat key-value configuration. Every key is required; all
// missing, unknown, or mistyped keys are reported together in one pass.
inline ExperimentConfig parse_config_text(const std::string& text,
                                          const std::string& origin = "config") {
  detail::ConfigParser p;
  p.load_text(text);
  ExperimentConfig c;
  p.read("system.devices", &c.system.devices);
  p.read("system.model_dim", &c.system.model_dim);
  p.read("system.rounds", &c.system.rounds);
  p.read("system.p_max_dbm", &c.system.p_max_dbm);
  p.read("system.noise_dbm", &c.system.noise_dbm);
  p.read("system.r_min", &c.system.r_min);
  p.read("system.r_max", &c.system.r_max);
  p.read("system.batch_size", &c.system.batch_size);
  p.read("system.dataset_size", &c.system.dataset_size);
  p.read("system.clip", &c.system.clip);
  p.read("system.alpha", &c.system.alpha);
  p.read("system.delta", &c.system.delta);
  p.read("controller.methods", &c.controller.methods);
  p.read("controller.nu", &c.controller.nu_grid);
  p.read("controller.V", &c.controller.V);
  p.read("controller.v_beta", &c.controller.v_beta);
  p.read("controller.v_coeff", &c.controller.v_coeff);
  p.read("controller.tau_rel", &c.controller.tau_rel);
  p.read("seeds.placement", &c.seeds.placement);
  p.read("seeds.fading", &c.seeds.fading);
  p.read("seeds.sampling", &c.seeds.sampling);
  p.read("seeds.noise", &c.seeds.noise);
  p.read("seeds.trials", &c.seeds.trials);
  p.read("output.dir", &c.output.dir);
  p.finish(origin);
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path);
}

inline std::string config_to_text(const ExperimentConfig& c) {
  std::ostringstream out;
  auto join_d = [](const std::vector<double>& xs) {
    std::string s;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (i) s += ",";
      s += format_double(xs[i]);
    }
    return s;
  };
  auto join_s = [](const std::vector<std::string>& xs) {
    std::string s;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (i) s += ",";
      s += xs[i];
    }
    return s;
  };
  out << "[system]\n";
  out << "devices = " << c.system.devices << "\n";
  out << "model_dim = " << c.system.model_dim << "\n";
  out << "rounds = " << c.system.rounds << "\n";
  out << "p_max_dbm = " << format_double(c.system.p_max_dbm) << "\n";
  out << "noise_dbm = " << format_double(c.system.noise_dbm) << "\n";
  out << "r_min = " << format_double(c.system.r_min) << "\n";
  out << "r_max = " << format_double(c.system.r_max) << "\n";
  out << "batch_size = " << c.system.batch_size << "\n";
  out << "dataset_size = " << c.system.dataset_size << "\n";
  out << "clip = " << format_double(c.system.clip) << "\n";
  out << "alpha = " << c.system.alpha << "\n";
  out << "delta = " << format_double(c.system.delta) << "\n";
  out << "\n[controller]\n";
  out << "methods = " << join_s(c.controller.methods) << "\n";
  out << "nu = " << join_d(c.controller.nu_grid) << "\n";
  out << "V = " << format_double(c.controller.V) << "\n";
  out << "v_beta = " << format_double(c.controller.v_beta) << "\n";
  out << "v_coeff = " << format_double(c.controller.v_coeff) << "\n";
  out << "tau_rel = " << format_double(c.controller.tau_rel) << "\n";
  out << "\n[seeds]\n";
  out << "placement = " << c.seeds.placement << "\n";
  out << "fading = " << c.seeds.fading << "\n";
  out << "sampling = " << c.seeds.sampling << "\n";
  out << "noise = " << c.seeds.noise << "\n";
  out << "trials = " << c.seeds.trials << "\n";
  out << "\n[output]\n";
  out << "dir = " << c.output.dir << "\n";
  return out.str();
}

inline void save_config(const ExperimentConfig& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config file: " + path);
  out << config_to_text(c);
}

// ---- Channel trace CSV: one JSON header line, then t,m,re,im rows. ----

inline void save_trace_csv(const ChannelTrace& trace,
                           const std::vector<DeviceProfile>& profiles,
                           const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write trace file: " + path);
  nlohmann::json header;
  header["fading_seed"] = trace.fading_seed;
  header["rounds"] = trace.num_rounds;
  header["devices"] = trace.num_devices;
  nlohmann::json devs = nlohmann::json::array();
  for (const auto& p : profiles) {
    devs.push_back({{"index", p.index},
                    {"distance_m", p.distance_m},
                    {"path_loss_linear", p.path_loss_linear},
                    {"batch_size", p.batch_size},
                    {"dataset_size", p.dataset_size},
                    {"loss_weight", p.loss_weight}});
  }
  header["profiles"] = devs;
  out << "# " << header.dump() << "\n";
  out << "t,m,re,im\n";
  for (int t = 0; t < trace.num_rounds; ++t) {
    for (int m = 0; m < trace.num_devices; ++m) {
      const auto& h = trace.at(t, m);
      out << t << "," << m << "," << format_double(h.real()) << ","
          << format_double(h.imag()) << "\n";
    }
  }
}

struct LoadedTrace {
  ChannelTrace trace;
  std::vector<DeviceProfile> profiles;
};

inline LoadedTrace load_trace_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trace file: " + path);
  std::string line;
  if (!std::getline(in, line) || line.size() < 2 || line[0] != '#') {
    throw std::runtime_error("trace file missing JSON header line: " + path);
  }
  const nlohmann::json header = nlohmann::json::parse(line.substr(1));

  LoadedTrace loaded;
  loaded.trace.fading_seed = header.at("fading_seed").get<std::uint64_t>();
  loaded.trace.num_rounds = header.at("rounds").get<int>();
  loaded.trace.num_devices = header.at("devices").get<int>();
  for (const auto& d : header.at("profiles")) {
    DeviceProfile p;
    p.index = d.at("index").get<int>();
    p.distance_m = d.at("distance_m").get<double>();
    p.path_loss_linear = d.at("path_loss_linear").get<double>();
    p.batch_size = d.at("batch_size").get<int>();
    p.dataset_size = d.at("dataset_size").get<int>();
    p.loss_weight = d.at("loss_weight").get<double>();
    p.validate();
    loaded.profiles.push_back(p);
  }
  if (static_cast<int>(loaded.profiles.size()) != loaded.trace.num_devices) {
    throw std::runtime_error("trace header device count mismatch");
  }

  const int rounds = loaded.trace.num_rounds;
  const int devices = loaded.trace.num_devices;
  loaded.trace.h.assign(static_cast<std::size_t>(rounds) * devices, {0.0, 0.0});
  if (!std::getline(in, line) || line != "t,m,re,im") {
    throw std::runtime_error("trace file missing column header: " + path);
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    int t = 0, m = 0;
    double re = 0.0, im = 0.0;
    std::getline(row, cell, ',');
    t = std::stoi(cell);
    std::getline(row, cell, ',');
    m = std::stoi(cell);
    std::getline(row, cell, ',');
    re = std::stod(cell);
    std::getline(row, cell, ',');
    im = std::stod(cell);
    if (t < 0 || t >= rounds || m < 0 || m >= devices) {
      throw std::runtime_error("trace row out of range: " + line);
    }
    loaded.trace.h[static_cast<std::size_t>(t) * devices + m] = {re, im};
  }
  loaded.trace.h_min_sq.assign(rounds, 0.0);
  for (int t = 0; t < rounds; ++t) {
    double mn = std::numeric_limits<double>::infinity();
    for (int m = 0; m < devices; ++m) {
      mn = std::min(mn, loaded.trace.gain_sq(t, m) / loaded.profiles[m].k_sq());
    }
    loaded.trace.h_min_sq[t] = mn;
  }
  return loaded;
}

// ---- Per-round run CSV shared by every method. ----

inline void write_run_csv(std::ostream& out,
                          const std::vector<RoundDecision>& decisions,
                          const std::vector<double>* queue_history) {
  const int num_devices =
      decisions.empty() ? 0 : static_cast<int>(decisions[0].rho_per_device.size());
  out << "t,Q,x,eta,constraint_term";
  for (int m = 0; m < num_devices; ++m) out << ",rho_dev_" << m;
  out << "\n";
  for (std::size_t t = 0; t < decisions.size(); ++t) {
    const auto& d = decisions[t];
    const double q = queue_history ? (*queue_history)[t] : 0.0;
    out << t << "," << format_double(q) << "," << format_double(d.x) << ","
        << format_double(d.eta) << "," << format_double(d.constraint_term);
    for (double rho : d.rho_per_device) out << "," << format_double(rho);
    out << "\n";
  }
}

// ---- Sweep report CSVs. ----

inline void write_sweep_rows_csv(std::ostream& out, const SweepReport& report) {
  out << "nu,method,trial,fading_seed,V,realized_lhs,mean_rho,mean_epsilon\n";
  for (const auto& r : report.rows) {
    out << format_double(r.nu) << "," << r.method << "," << r.trial << ","
        << r.fading_seed << "," << format_double(r.v_used) << ","
        << format_double(r.realized_lhs) << "," << format_double(r.mean_rho)
        << "," << format_double(r.mean_epsilon) << "\n";
  }
}

inline void write_sweep_summary_csv(std::ostream& out,
                                    const SweepReport& report) {
  out << "nu,method,trials,V,mean_lhs,mean_rho,rho_ci95,mean_epsilon,"
         "epsilon_ci95\n";
  for (const auto& a : report.aggregates) {
    out << format_double(a.nu) << "," << a.method << "," << a.trials << ","
        << format_double(a.v_used) << "," << format_double(a.mean_lhs) << ","
        << format_double(a.mean_rho) << "," << format_double(a.rho_ci95) << ","
        << format_double(a.mean_epsilon) << ","
        << format_double(a.epsilon_ci95) << "\n";
  }
}

// JSON-compatible key-value summary, floats at 17 significant digits.
inline std::string sweep_summary_json(const SweepReport& report) {
  std::ostringstream out;
  out << "{\"aggregates\":[";
  for (std::size_t i = 0; i < report.aggregates.size(); ++i) {
    const auto& a = report.aggregates[i];
    if (i) out << ",";
    out << "{\"nu\":" << format_double(a.nu) << ",\"method\":\"" << a.method
        << "\",\"trials\":" << a.trials << ",\"V\":" << format_double(a.v_used)
        << ",\"mean_lhs\":" << format_double(a.mean_lhs)
        << ",\"mean_rho\":" << format_double(a.mean_rho)
        << ",\"rho_ci95\":" << format_double(a.rho_ci95)
        << ",\"mean_epsilon\":" << format_double(a.mean_epsilon)
        << ",\"epsilon_ci95\":" << format_double(a.epsilon_ci95) << "}";
  }
  out << "]}";
  return out.str();
}

inline void emit_report(const SweepReport& report, const std::string& dir) {
  const std::string rows_path = dir + "/sweep_rows.csv";
  const std::string summary_path = dir + "/sweep_summary.csv";
  const std::string json_path = dir + "/sweep_summary.json";
  std::ofstream rows(rows_path);
  if (!rows) throw std::runtime_error("cannot write " + rows_path);
  write_sweep_rows_csv(rows, report);
  std::ofstream summary(summary_path);
  if (!summary) throw std::runtime_error("cannot write " + summary_path);
  write_sweep_summary_csv(summary, report);
  std::ofstream js(json_path);
  if (!js) throw std::runtime_error("cannot write " + json_path);
  js << sweep_summary_json(report) << "\n";
}

}  // namespace adascale

#endif  // ADASCALE_IO_HPP
