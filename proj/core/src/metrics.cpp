#include "rsplab/metrics.hpp"

#include <fstream>
#include <map>

#include <json.hpp>

#include "rsplab/config.hpp"
#include "rsplab/image.hpp"

namespace rsplab::metrics {

std::vector<Row> read_metrics_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw img::IoError("cannot open " + path);
  std::map<std::int64_t, Row> by_step;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      throw config::ConfigError(path + ":" + std::to_string(line_no) + ": malformed metrics record");
    }
    try {
      Row r;
      r.step = j.at("step").get<std::int64_t>();
      r.epoch = j.at("epoch").get<int>();
      r.lr = j.at("lr").get<double>();
      r.l_m = j.at("L_m").get<double>();
      r.l_a = j.at("L_a").get<double>();
      r.l_total = j.at("L_total").get<double>();
      r.nce_acc = j.at("nce_acc").get<double>();
      by_step[r.step] = r;
    } catch (const nlohmann::json::exception& e) {
      throw config::ConfigError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  std::vector<Row> rows;
  rows.reserve(by_step.size());
  for (auto& [step, row] : by_step) rows.push_back(row);
  return rows;
}

}  // namespace rsplab::metrics
