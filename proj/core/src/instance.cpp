// SPDX-License-Identifier: Apache-2.0
#include "kvl/instance.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include <nlohmann/json.hpp>

#include "kvl/error.hpp"

namespace kvl {

using nlohmann::json;

namespace {

Instance instance_from_json(const json& j, std::int64_t default_id) {
  Instance inst;
  inst.id = j.contains("id") ? j.at("id").get<std::int64_t>() : default_id;
  inst.mode = j.contains("mode")
                  ? task_mode_from_name(j.at("mode").get<std::string>())
                  : TaskMode::QToA;
  inst.query = j.at("query").get<std::string>();
  const auto& responses = j.at("responses");
  if (!responses.is_array() || responses.size() != 4) {
    throw DataError("responses must be an array of 4 strings");
  }
  for (std::size_t i = 0; i < 4; ++i) {
    inst.responses[i] = responses[i].get<std::string>();
  }
  inst.gold = j.at("gold").get<int>();
  if (inst.gold < 0 || inst.gold > 3) {
    throw DataError("gold index out of range 0..3");
  }
  const auto& image = j.at("image");
  inst.image.width = image.at("width").get<double>();
  inst.image.height = image.at("height").get<double>();
  for (const auto& rj : j.at("regions")) {
    Region region;
    const auto& bbox = rj.at("bbox");
    if (!bbox.is_array() || bbox.size() != 4) {
      throw DataError("region bbox must have 4 numbers");
    }
    for (std::size_t i = 0; i < 4; ++i) region.bbox[i] = bbox[i].get<double>();
    region.appearance = rj.at("appearance").get<std::vector<double>>();
    if (rj.contains("label") && !rj.at("label").is_null()) {
      region.label = rj.at("label").get<std::string>();
    }
    inst.regions.push_back(std::move(region));
  }
  return inst;
}

json instance_to_json(const Instance& inst) {
  json regions = json::array();
  for (const Region& region : inst.regions) {
    json rj;
    rj["bbox"] = region.bbox;
    rj["appearance"] = region.appearance;
    rj["label"] = region.label ? json(*region.label) : json(nullptr);
    regions.push_back(std::move(rj));
  }
  return json{{"id", inst.id},
              {"mode", task_mode_name(inst.mode)},
              {"query", inst.query},
              {"responses", inst.responses},
              {"gold", inst.gold},
              {"image", {{"width", inst.image.width}, {"height", inst.image.height}}},
              {"regions", std::move(regions)}};
}

bool near(double a, double b) {
  return std::abs(a - b) <= 1e-9 * std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace

std::string task_mode_name(TaskMode mode) {
  return mode == TaskMode::QToA ? "qa" : "qar";
}

TaskMode task_mode_from_name(const std::string& name) {
  if (name == "qa") return TaskMode::QToA;
  if (name == "qar") return TaskMode::QAToR;
  throw DataError("unknown task mode '" + name + "' (expected qa or qar)");
}

std::size_t whole_image_region(const Instance& instance) {
  for (std::size_t i = 0; i < instance.regions.size(); ++i) {
    const auto& b = instance.regions[i].bbox;
    if (near(b[0], 0.0) && near(b[1], 0.0) && near(b[2], instance.image.width) &&
        near(b[3], instance.image.height)) {
      return i;
    }
  }
  throw DataError("instance " + std::to_string(instance.id) +
                  ": no whole-image region (needed for the appearance of "
                  "non-visual elements)");
}

void validate_instance(const Instance& instance, std::size_t d_app) {
  if (instance.image.width <= 0.0 || instance.image.height <= 0.0) {
    throw DataError("instance " + std::to_string(instance.id) +
                    ": image size must be positive");
  }
  for (std::size_t i = 0; i < instance.regions.size(); ++i) {
    const Region& region = instance.regions[i];
    if (region.appearance.size() != d_app) {
      throw DataError("instance " + std::to_string(instance.id) + ", region " +
                      std::to_string(i) + ": appearance vector has " +
                      std::to_string(region.appearance.size()) +
                      " entries, expected " + std::to_string(d_app));
    }
    const auto& b = region.bbox;
    if (!(b[0] >= 0.0 && b[0] < b[2] && b[2] <= instance.image.width) ||
        !(b[1] >= 0.0 && b[1] < b[3] && b[3] <= instance.image.height)) {
      throw DataError("instance " + std::to_string(instance.id) + ", region " +
                      std::to_string(i) + ": bounding box outside the image");
    }
  }
  whole_image_region(instance);
}

std::vector<Instance> load_instances(std::istream& in) {
  std::vector<Instance> instances;
  std::string line;
  std::int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      instances.push_back(
          instance_from_json(json::parse(line), line_no - 1));
    } catch (const json::exception& e) {
      throw DataError("line " + std::to_string(line_no) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return instances;
}

std::vector<Instance> load_instances_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open instance file: " + path);
  return load_instances(in);
}

std::vector<Instance> load_instances_lenient(
    std::istream& in, std::vector<std::string>* diagnostics) {
  std::vector<Instance> instances;
  std::string line;
  std::int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      instances.push_back(
          instance_from_json(json::parse(line), line_no - 1));
    } catch (const std::exception& e) {
      if (diagnostics) {
        diagnostics->push_back("line " + std::to_string(line_no) + ": " +
                               e.what());
      }
    }
  }
  return instances;
}

void save_instances(const std::vector<Instance>& instances, std::ostream& out) {
  for (const Instance& inst : instances) {
    out << instance_to_json(inst).dump() << '\n';
  }
}

void save_instances_file(const std::vector<Instance>& instances,
                         const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write instance file: " + path);
  save_instances(instances, out);
}

std::string instance_to_json_line(const Instance& instance) {
  return instance_to_json(instance).dump();
}

}  // namespace kvl
