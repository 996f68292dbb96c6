// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "kvl/sequence.hpp"

namespace kvl {

/// Which subtask a record belongs to: pick the answer given the question, or
/// pick the rationale given the question plus its correct answer.
enum class TaskMode { QToA, QAToR };

std::string task_mode_name(TaskMode mode);
TaskMode task_mode_from_name(const std::string& name);

struct ImageSize {
  double width = 0.0;
  double height = 0.0;
};

/// One multiple-choice record: a query, exactly four candidate responses, the
/// gold index, and the image regions (the first region with a full-image box
/// doubles as the whole-image appearance source).
struct Instance {
  std::int64_t id = 0;
  TaskMode mode = TaskMode::QToA;
  std::string query;
  std::array<std::string, 4> responses;
  int gold = 0;
  ImageSize image;
  std::vector<Region> regions;
};

/// Index of the first region whose box spans the whole image.
/// Throws DataError when there is none.
std::size_t whole_image_region(const Instance& instance);

/// Structural checks beyond parsing: positive image size, in-range boxes,
/// consistent appearance width, mandatory whole-image region.
void validate_instance(const Instance& instance, std::size_t d_app);

/// JSONL input, one instance per line. Strict: any malformed line raises
/// DataError naming the line. Missing `id` defaults to the line index,
/// missing `mode` to "qa".
std::vector<Instance> load_instances(std::istream& in);
std::vector<Instance> load_instances_file(const std::string& path);

/// Lenient variant for the transform pipeline: malformed lines become
/// diagnostics instead of errors.
std::vector<Instance> load_instances_lenient(std::istream& in,
                                             std::vector<std::string>* diagnostics);

void save_instances(const std::vector<Instance>& instances, std::ostream& out);
void save_instances_file(const std::vector<Instance>& instances,
                         const std::string& path);

/// One instance as its canonical JSONL line (no trailing newline).
std::string instance_to_json_line(const Instance& instance);

}  // namespace kvl
