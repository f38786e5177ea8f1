#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "msgnn/cnf.hpp"
#include "msgnn/rng.hpp"

namespace msgnn {

// Random Max-kSAT instance family: m clauses over n variables, each clause
// drawing k distinct variables and independent fair polarity coins.
struct GenSpec {
  int k = 0;
  int n = 0;
  int m = 0;
  std::uint64_t seed = 0;

  void validate() const {
    if (k < 1) throw std::invalid_argument("gen: k must be >= 1");
    if (n < k) throw std::invalid_argument("gen: need k <= n");
    if (m < 1) throw std::invalid_argument("gen: m must be >= 1");
  }
};

// One instance from one SplitMix64 stream. Per clause: k distinct variables
// by partial Fisher-Yates over a fresh identity array of 1..n (draw order is
// kept as literal order), then k polarity coins in variable order, bit 1
// meaning positive. Clause j consumes exactly 2k draws starting at draw 2kj.
inline CnfFormula generate_instance(const GenSpec& spec) {
  spec.validate();
  SplitMix64 rng(spec.seed);
  std::vector<int> scratch(static_cast<size_t>(spec.n));
  std::vector<Clause> clauses;
  clauses.reserve(static_cast<size_t>(spec.m));
  for (int c = 0; c < spec.m; ++c) {
    std::iota(scratch.begin(), scratch.end(), 1);
    for (int i = 0; i < spec.k; ++i) {
      int j = i + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(spec.n - i)));
      std::swap(scratch[i], scratch[j]);
    }
    std::vector<Lit> lits;
    lits.reserve(static_cast<size_t>(spec.k));
    for (int i = 0; i < spec.k; ++i) {
      bool positive = rng.next_coin();
      lits.emplace_back(positive ? scratch[i] : -scratch[i]);
    }
    clauses.emplace_back(std::move(lits));
  }
  return CnfFormula(spec.n, std::move(clauses));
}

enum class Split { Train, Val, Test };

inline const char* split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  throw std::logic_error("bad split");
}

inline Split split_from_name(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  throw std::invalid_argument("unknown split name: " + s);
}

struct ManifestEntry {
  int index = 0;
  std::uint64_t seed = 0;
  std::string path;  // relative to the manifest's directory
  Split split = Split::Train;
};

struct DatasetManifest {
  GenSpec spec;
  int count = 0;
  std::vector<ManifestEntry> entries;
};

// 8:1:1 split by instance index: the first floor(count*8/10) are train, the
// next floor(count/10) are val, the remainder test.
inline Split split_for_index(int index, int count) {
  int train = count * 8 / 10;
  int val = count / 10;
  if (index < train) return Split::Train;
  if (index < train + val) return Split::Val;
  return Split::Test;
}

inline std::string instance_filename(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "inst_%05d.cnf", index);
  return buf;
}

namespace detail {

inline constexpr const char* kManifestMagic = "msgnn-manifest v1";

// The generator recipe is written into every manifest so a dataset is
// reproducible from the manifest alone.
inline constexpr const char* kRngDoc[] = {
    "rng splitmix64: next() advances state += 0x9e3779b97f4a7c15 and returns "
    "fin(state) where fin(z): z^=z>>30; z*=0xbf58476d1ce4e5b9; z^=z>>27; "
    "z*=0x94d049bb133111eb; z^=z>>31",
    "derive instance_seed(i) = fin(seed + (i+1)*0x9e3779b97f4a7c15)",
    "clause vars: partial fisher-yates over fresh 1..n, draw j = i + "
    "floor(next()*(n-i)/2^64), keep draw order; polarity per var: next()&1, "
    "1 = positive",
};

}  // namespace detail

inline void write_manifest(std::ostream& out, const DatasetManifest& man) {
  out << detail::kManifestMagic << '\n';
  out << "spec k=" << man.spec.k << " n=" << man.spec.n << " m=" << man.spec.m
      << " seed=" << man.spec.seed << " count=" << man.count << '\n';
  for (const char* doc : detail::kRngDoc) out << "# " << doc << '\n';
  out << "# fields: index seed path split\n";
  for (const ManifestEntry& e : man.entries)
    out << e.index << ' ' << e.seed << ' ' << e.path << ' ' << split_name(e.split) << '\n';
}

inline DatasetManifest parse_manifest(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("manifest: empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != detail::kManifestMagic)
    throw std::runtime_error("manifest: unrecognized first line (want '" +
                             std::string(detail::kManifestMagic) + "')");
  DatasetManifest man;
  if (!std::getline(in, line)) throw std::runtime_error("manifest: missing spec line");
  unsigned long long seed = 0;
  if (std::sscanf(line.c_str(), "spec k=%d n=%d m=%d seed=%llu count=%d", &man.spec.k,
                  &man.spec.n, &man.spec.m, &seed, &man.count) != 5)
    throw std::runtime_error("manifest: malformed spec line");
  man.spec.seed = seed;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    ManifestEntry e;
    std::string split;
    unsigned long long eseed = 0;
    if (!(ls >> e.index >> eseed >> e.path >> split))
      throw std::runtime_error("manifest: malformed entry line: " + line);
    e.seed = eseed;
    e.split = split_from_name(split);
    man.entries.push_back(std::move(e));
  }
  if (static_cast<int>(man.entries.size()) != man.count)
    throw std::runtime_error("manifest: entry count does not match declared count");
  return man;
}

inline DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest: " + path.string());
  return parse_manifest(in);
}

// Generates `count` instances into `out_dir` (created if needed) plus a
// manifest.txt. Instance i uses seed mix_seed(spec.seed, i); spec.m and the
// per-instance files are byte-identical across runs with the same arguments.
inline DatasetManifest generate_dataset(const GenSpec& spec, int count,
                                        const std::filesystem::path& out_dir) {
  spec.validate();
  if (count < 1) throw std::invalid_argument("gen: count must be >= 1");
  std::filesystem::create_directories(out_dir);
  DatasetManifest man;
  man.spec = spec;
  man.count = count;
  man.entries.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) {
    ManifestEntry e;
    e.index = i;
    e.seed = mix_seed(spec.seed, static_cast<std::uint64_t>(i));
    e.path = instance_filename(i);
    e.split = split_for_index(i, count);
    GenSpec inst = spec;
    inst.seed = e.seed;
    CnfFormula f = generate_instance(inst);
    std::ofstream out(out_dir / e.path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + (out_dir / e.path).string());
    write_dimacs(out, f);
    man.entries.push_back(std::move(e));
  }
  std::ofstream mout(out_dir / "manifest.txt", std::ios::binary);
  if (!mout) throw std::runtime_error("cannot write manifest in " + out_dir.string());
  write_manifest(mout, man);
  return man;
}

inline CnfFormula load_instance(const std::filesystem::path& manifest_dir,
                                const ManifestEntry& e) {
  std::ifstream in(manifest_dir / e.path);
  if (!in) throw std::runtime_error("cannot open instance: " + (manifest_dir / e.path).string());
  return parse_dimacs(in);
}

}  // namespace msgnn
