#pragma once

#include <optional>
#include <string>
#include <vector>

#include "evidentia/error.hpp"

namespace evidentia {

// Canonical dataset format: UTF-8 CSV with mandatory header
//   qid,group,label,class,htext,etext
// one row per (hypothesis, evidence) pair, RFC-4180 quoting, '\n' line
// ends. `group` and `class` are empty for the argus task; multiple-choice
// tasks carry a group id shared by exactly four hypotheses of which
// exactly one is labeled 1. A dataset directory holds train.csv, val.csv
// and test.csv.

enum class Task { argus, ai2, mctest };

Task task_from_string(const std::string& s);
const char* task_name(Task t);

struct HypothesisInstance {
  std::string qid;
  std::string group;  // empty for argus
  int label = 0;      // y in {0,1}
  std::string cls;    // "one" | "multi" for mctest, else empty
  std::string hypothesis;
  std::vector<std::string> evidence;  // nonempty
};

struct QuestionGroup {
  std::string id;
  std::vector<int> members;  // indices into the instance list, size 4
  std::string cls;
  int positive = -1;  // member position (0..3) of the label-1 hypothesis
};

struct Split {
  std::vector<HypothesisInstance> instances;
  std::vector<QuestionGroup> groups;  // empty for argus
};

struct Dataset {
  Task task = Task::argus;
  Split train, val, test;

  const Split& split(const std::string& name) const;
};

// Low-level RFC-4180 row parsing/writing, exposed for tests.
std::vector<std::vector<std::string>> parse_csv(const std::string& text);
std::string write_csv(const std::vector<std::vector<std::string>>& rows);

Split load_split_csv(const std::string& path, Task task);
Dataset load_dataset(const std::string& dir, Task task);
void save_split_csv(const std::string& path, const Split& split, Task task);

struct SplitStats {
  long questions = 0;
  double mean_evidence = 0.0;
  double label_balance = 0.0;  // fraction of label-1 hypotheses
};
SplitStats validate_stats(const Split& split);

}  // namespace evidentia
