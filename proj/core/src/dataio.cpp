#include "evidentia/dataio.hpp"

#include <fstream>
#include <map>
#include <sstream>

namespace evidentia {

Task task_from_string(const std::string& s) {
  if (s == "argus") return Task::argus;
  if (s == "ai2") return Task::ai2;
  if (s == "mctest") return Task::mctest;
  throw ValidationError("unknown task: '" + s + "' (expected argus|ai2|mctest)");
}

const char* task_name(Task t) {
  switch (t) {
    case Task::argus: return "argus";
    case Task::ai2: return "ai2";
    case Task::mctest: return "mctest";
  }
  return "?";
}

const Split& Dataset::split(const std::string& name) const {
  if (name == "train") return train;
  if (name == "val") return val;
  if (name == "test") return test;
  throw ValidationError("unknown split: '" + name + "' (expected train|val|test)");
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  size_t i = 0;
  const size_t n = text.size();

  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    rows.push_back(std::move(row));
    row.clear();
  };

  while (i < n) {
    char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < n && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"' && !field_started && field.empty()) {
      in_quotes = true;
      field_started = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\n') {
      if (!field.empty() && field.back() == '\r') field.pop_back();
      end_row();
    } else {
      field.push_back(c);
      field_started = true;
    }
    ++i;
  }
  if (in_quotes) throw ValidationError("csv: unterminated quoted field");
  if (field_started || !field.empty() || !row.empty()) end_row();
  return rows;
}

static bool needs_quoting(const std::string& f) {
  return f.find_first_of(",\"\n\r") != std::string::npos;
}

std::string write_csv(const std::vector<std::vector<std::string>>& rows) {
  std::string out;
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.size(); ++i) {
      if (i) out.push_back(',');
      if (needs_quoting(row[i])) {
        out.push_back('"');
        for (char c : row[i]) {
          if (c == '"') out.push_back('"');
          out.push_back(c);
        }
        out.push_back('"');
      } else {
        out += row[i];
      }
    }
    out.push_back('\n');
  }
  return out;
}

static const std::vector<std::string> kHeader = {"qid", "group", "label",
                                                 "class", "htext", "etext"};

Split load_split_csv(const std::string& path, Task task) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open dataset file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  auto rows = parse_csv(ss.str());

  if (rows.empty() || rows[0] != kHeader)
    throw ValidationError(path + ": missing or malformed header (expected "
                          "qid,group,label,class,htext,etext)");

  Split split;
  std::map<std::string, int> by_qid;

  for (size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != 6)
      throw ValidationError(path + ": row " + std::to_string(r + 1) + " has " +
                            std::to_string(row.size()) + " fields, expected 6");
    const std::string &qid = row[0], &group = row[1], &label_s = row[2], &cls = row[3],
                      &htext = row[4], &etext = row[5];
    if (qid.empty()) throw ValidationError(path + ": row " + std::to_string(r + 1) + ": empty qid");
    int label;
    if (label_s == "0")
      label = 0;
    else if (label_s == "1")
      label = 1;
    else
      throw ValidationError(path + ": qid " + qid + ": non-binary label '" + label_s + "'");
    if (etext.empty()) throw ValidationError(path + ": qid " + qid + ": empty evidence text");
    if (htext.empty()) throw ValidationError(path + ": qid " + qid + ": empty hypothesis text");
    if (task == Task::argus && (!group.empty() || !cls.empty()))
      throw ValidationError(path + ": qid " + qid +
                            ": group/class must be empty for the argus task");
    if (task != Task::argus && group.empty())
      throw ValidationError(path + ": qid " + qid + ": missing group id");
    if (task == Task::mctest && cls != "one" && cls != "multi")
      throw ValidationError(path + ": qid " + qid + ": class must be one|multi, got '" + cls +
                            "'");

    auto it = by_qid.find(qid);
    if (it == by_qid.end()) {
      HypothesisInstance inst;
      inst.qid = qid;
      inst.group = group;
      inst.label = label;
      inst.cls = cls;
      inst.hypothesis = htext;
      inst.evidence.push_back(etext);
      by_qid[qid] = static_cast<int>(split.instances.size());
      split.instances.push_back(std::move(inst));
    } else {
      HypothesisInstance& inst = split.instances[it->second];
      if (inst.hypothesis != htext || inst.label != label || inst.group != group ||
          inst.cls != cls)
        throw ValidationError(path + ": qid " + qid + ": inconsistent rows");
      inst.evidence.push_back(etext);
    }
  }

  if (task != Task::argus) {
    std::map<std::string, std::vector<int>> members;  // keeps first-appearance group order below
    std::vector<std::string> order;
    for (size_t i = 0; i < split.instances.size(); ++i) {
      const auto& inst = split.instances[i];
      if (!members.count(inst.group)) order.push_back(inst.group);
      members[inst.group].push_back(static_cast<int>(i));
    }
    for (const auto& gid : order) {
      const auto& m = members[gid];
      if (m.size() != 4)
        throw ValidationError(path + ": group " + gid + " has " + std::to_string(m.size()) +
                              " hypotheses, expected 4");
      QuestionGroup g;
      g.id = gid;
      g.members = m;
      g.cls = split.instances[m[0]].cls;
      int positives = 0;
      for (int k = 0; k < 4; ++k) {
        const auto& inst = split.instances[m[k]];
        if (inst.cls != g.cls)
          throw ValidationError(path + ": group " + gid + ": inconsistent class tags");
        if (inst.label == 1) {
          ++positives;
          g.positive = k;
        }
      }
      if (positives != 1)
        throw ValidationError(path + ": group " + gid + " has " + std::to_string(positives) +
                              " positive labels, expected exactly 1");
      split.groups.push_back(std::move(g));
    }
  }
  return split;
}

Dataset load_dataset(const std::string& dir, Task task) {
  Dataset d;
  d.task = task;
  d.train = load_split_csv(dir + "/train.csv", task);
  d.val = load_split_csv(dir + "/val.csv", task);
  d.test = load_split_csv(dir + "/test.csv", task);
  return d;
}

void save_split_csv(const std::string& path, const Split& split, Task task) {
  (void)task;
  std::vector<std::vector<std::string>> rows;
  rows.push_back(kHeader);
  for (const auto& inst : split.instances)
    for (const auto& e : inst.evidence)
      rows.push_back({inst.qid, inst.group, std::to_string(inst.label), inst.cls,
                      inst.hypothesis, e});
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write dataset file: " + path);
  out << write_csv(rows);
}

SplitStats validate_stats(const Split& split) {
  SplitStats s;
  s.questions = static_cast<long>(split.instances.size());
  if (s.questions == 0) return s;
  double ev = 0.0, pos = 0.0;
  for (const auto& inst : split.instances) {
    ev += static_cast<double>(inst.evidence.size());
    pos += inst.label;
  }
  s.mean_evidence = ev / static_cast<double>(s.questions);
  s.label_balance = pos / static_cast<double>(s.questions);
  return s;
}

}  // namespace evidentia
