#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace seqrec {

// One (user, item, timestamp) event from a log.
struct Interaction {
    std::string user_id;
    std::string item_id;
    int64_t timestamp = 0;
};

enum class LogFormat { Csv, Tsv, JsonLines };

struct IngestReport {
    int64_t parsed = 0;
    int64_t malformed = 0;
};

// Contiguous integer ids; item and user ids start at 1, id 0 is reserved
// for padding and never assigned.
struct Catalog {
    std::unordered_map<std::string, int> item_index;
    std::unordered_map<std::string, int> user_index;
    std::vector<std::string> item_names;  // item_names[i-1] is item id i
    std::vector<std::string> user_names;

    int num_items() const { return static_cast<int>(item_names.size()); }
    int num_users() const { return static_cast<int>(user_names.size()); }
};

// A left-padded fixed-length history plus the next-item target.
struct SequenceExample {
    int user = 0;
    std::vector<int> items;  // length n_max, padding id 0 as a left prefix
    int true_length = 0;
    int target = 0;

    bool operator==(const SequenceExample&) const = default;
};

struct DatasetSplits {
    std::vector<SequenceExample> train;
    std::vector<SequenceExample> validation;
    std::vector<SequenceExample> test;
    Catalog catalog;
    int n_max = 20;
    int64_t total_actions = 0;
};

struct DatasetStats {
    int64_t users = 0;
    int64_t items = 0;
    int64_t actions = 0;
    double avg_length = 0.0;
    double sparsity = 0.0;  // fraction, e.g. 0.9993
};

// Parses all well-formed records in file order; malformed lines are counted,
// not fatal. Throws DataError on unreadable files or zero valid records.
std::vector<Interaction> ingest(const std::string& path, LogFormat format,
                                IngestReport* report = nullptr);

LogFormat format_from_name(const std::string& name);

// Iteratively drops users and items with fewer than `k` interactions until a
// fixed point. Idempotent.
std::vector<Interaction> five_core_filter(std::vector<Interaction> interactions, int k = 5);

// Leave-one-out split: per user (sorted by timestamp, ties by input order)
// the last item is the test target, the penultimate the validation target,
// and every earlier prefix position a training example. Contexts keep the
// most recent n_max items, left-padded with 0.
DatasetSplits build_splits(const std::vector<Interaction>& interactions, int n_max = 20);

DatasetStats stats(const DatasetSplits& splits);

// json-lines / json serialization used by the CLI and by the secondary
// tooling. Round-trips exactly.
void save_splits(const DatasetSplits& splits, const std::string& dir);
DatasetSplits load_splits(const std::string& dir);
std::string stats_json(const DatasetStats& s);

}  // namespace seqrec
