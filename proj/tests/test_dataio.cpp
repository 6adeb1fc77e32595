#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <set>
#include <fstream>

#include "evidentia/dataio.hpp"

#include "helpers.hpp"

using namespace evidentia;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
  std::string path = "/tmp/" + name;
  std::ofstream out(path, std::ios::binary);
  out << content;
  return path;
}

const char* kMcGood =
    "qid,group,label,class,htext,etext\n"
    "m1a,g1,0,one,story one answer a?,sentence about a.\n"
    "m1b,g1,1,one,story one answer b?,sentence about b.\n"
    "m1b,g1,1,one,story one answer b?,more sentences about b.\n"
    "m1c,g1,0,one,story one answer c?,sentence about c.\n"
    "m1d,g1,0,one,story one answer d?,sentence about d.\n";

}  // namespace

TEST_CASE("csv parser handles rfc-4180 quoting") {
  auto rows = parse_csv("a,\"b,c\",\"say \"\"hi\"\"\",\"line\nbreak\"\nplain,,x,\n");
  REQUIRE(rows.size() == 2);
  CHECK(rows[0] == std::vector<std::string>{"a", "b,c", "say \"hi\"", "line\nbreak"});
  CHECK(rows[1] == std::vector<std::string>{"plain", "", "x", ""});
  CHECK_THROWS_AS(parse_csv("\"unterminated"), ValidationError);
}

TEST_CASE("csv writer round-trips through the parser") {
  std::vector<std::vector<std::string>> rows = {
      {"plain", "with,comma", "with \"quote\"", "multi\nline", ""},
      {"", "x", "\r tricky", "ok", "end"}};
  CHECK(parse_csv(write_csv(rows)) == rows);
}

TEST_CASE("loading the bundled synthetic argus fixture") {
  Dataset d = load_dataset(testutil::data_dir() + "/synthetic_argus", Task::argus);

  SplitStats train = validate_stats(d.train);
  CHECK(train.questions == 6);
  CHECK(train.mean_evidence == doctest::Approx(2.5));  // (3+2+4+1+2+3)/6, counted by hand
  CHECK(train.label_balance == doctest::Approx(0.5));

  SplitStats val = validate_stats(d.val);
  CHECK(val.questions == 2);
  CHECK(val.mean_evidence == doctest::Approx(1.5));

  SplitStats test = validate_stats(d.test);
  CHECK(test.questions == 2);
  CHECK(test.mean_evidence == doctest::Approx(2.5));

  // quoting survived: the q3 hypothesis contains a comma and quotes
  bool found = false;
  for (const auto& inst : d.train.instances)
    if (inst.qid == "q3") {
      found = true;
      CHECK(inst.hypothesis == "Did \"Acme, Inc.\" acquire Globex?");
      CHECK(inst.evidence.size() == 4);
    }
  CHECK(found);
}

TEST_CASE("splits are disjoint by qid and iteration order is stable") {
  Dataset d = load_dataset(testutil::data_dir() + "/synthetic_argus", Task::argus);
  std::set<std::string> seen;
  for (const Split* s : {&d.train, &d.val, &d.test})
    for (const auto& inst : s->instances) CHECK(seen.insert(inst.qid).second);

  Dataset again = load_dataset(testutil::data_dir() + "/synthetic_argus", Task::argus);
  REQUIRE(again.train.instances.size() == d.train.instances.size());
  for (size_t i = 0; i < d.train.instances.size(); ++i)
    CHECK(again.train.instances[i].qid == d.train.instances[i].qid);

  CHECK_THROWS_AS(d.split("dev"), ValidationError);
}

TEST_CASE("save then load is field-for-field identical") {
  Dataset d = load_dataset(testutil::data_dir() + "/synthetic_argus", Task::argus);
  std::string path = "/tmp/evidentia_roundtrip.csv";
  save_split_csv(path, d.train, Task::argus);
  Split reloaded = load_split_csv(path, Task::argus);
  std::remove(path.c_str());

  REQUIRE(reloaded.instances.size() == d.train.instances.size());
  for (size_t i = 0; i < reloaded.instances.size(); ++i) {
    CHECK(reloaded.instances[i].qid == d.train.instances[i].qid);
    CHECK(reloaded.instances[i].label == d.train.instances[i].label);
    CHECK(reloaded.instances[i].hypothesis == d.train.instances[i].hypothesis);
    CHECK(reloaded.instances[i].evidence == d.train.instances[i].evidence);
  }
}

TEST_CASE("multiple-choice groups load with one/multi tags") {
  std::string path = write_temp("evidentia_mc_good.csv", kMcGood);
  Split s = load_split_csv(path, Task::mctest);
  std::remove(path.c_str());
  REQUIRE(s.groups.size() == 1);
  CHECK(s.groups[0].members.size() == 4);
  CHECK(s.groups[0].positive == 1);
  CHECK(s.groups[0].cls == "one");
  CHECK(s.instances[1].evidence.size() == 2);
}

TEST_CASE("a 3-member group is rejected naming the group") {
  std::string content =
      "qid,group,label,class,htext,etext\n"
      "m1a,g9,0,one,h a?,e a.\n"
      "m1b,g9,1,one,h b?,e b.\n"
      "m1c,g9,0,one,h c?,e c.\n";
  std::string path = write_temp("evidentia_mc_3.csv", content);
  try {
    load_split_csv(path, Task::mctest);
    FAIL("expected group-size rejection");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("g9") != std::string::npos);
  }
  std::remove(path.c_str());
}

TEST_CASE("groups need exactly one positive label") {
  std::string content =
      "qid,group,label,class,htext,etext\n"
      "a,g2,1,one,h a?,e a.\n"
      "b,g2,1,one,h b?,e b.\n"
      "c,g2,0,one,h c?,e c.\n"
      "d,g2,0,one,h d?,e d.\n";
  std::string path = write_temp("evidentia_mc_2pos.csv", content);
  CHECK_THROWS_AS(load_split_csv(path, Task::mctest), ValidationError);
  std::remove(path.c_str());
}

TEST_CASE("malformed rows are rejected with the qid") {
  auto expect_reject = [](const std::string& name, const std::string& rows,
                          const std::string& needle) {
    std::string path = write_temp(name, "qid,group,label,class,htext,etext\n" + rows);
    try {
      load_split_csv(path, Task::argus);
      FAIL(("expected rejection: " + needle));
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find(needle) != std::string::npos);
    }
    std::remove(path.c_str());
  };
  expect_reject("evidentia_bad_label.csv", "q7,,yes,,h?,e.\n", "non-binary");
  expect_reject("evidentia_bad_empty_e.csv", "q8,,1,,h?,\n", "q8");
  expect_reject("evidentia_bad_group.csv", "q9,gx,1,,h?,e.\n", "group");
}

TEST_CASE("header is mandatory") {
  std::string path = write_temp("evidentia_no_header.csv", "q1,,1,,h?,e.\n");
  CHECK_THROWS_AS(load_split_csv(path, Task::argus), ValidationError);
  std::remove(path.c_str());
}

TEST_CASE("empty split file loads as an empty stream") {
  std::string path = write_temp("evidentia_empty.csv", "qid,group,label,class,htext,etext\n");
  Split s = load_split_csv(path, Task::argus);
  CHECK(s.instances.empty());
  CHECK(validate_stats(s).questions == 0);
  std::remove(path.c_str());
}

TEST_CASE("mctest groups must share the class tag") {
  std::string content =
      "qid,group,label,class,htext,etext\n"
      "a,g3,1,one,h a?,e a.\n"
      "b,g3,0,multi,h b?,e b.\n"
      "c,g3,0,one,h c?,e c.\n"
      "d,g3,0,one,h d?,e d.\n";
  std::string path = write_temp("evidentia_mc_cls.csv", content);
  CHECK_THROWS_AS(load_split_csv(path, Task::mctest), ValidationError);
  std::remove(path.c_str());
}
