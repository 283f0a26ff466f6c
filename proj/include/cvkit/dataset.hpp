#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "cvkit/homodyne.hpp"
#include "cvkit/stellar.hpp"
#include "cvkit/witness.hpp"

namespace cvkit::pipeline {

inline constexpr std::uint16_t kDatasetVersion = 1;
inline constexpr std::size_t kRecordBytes = 9472;

// One generated state: how it was made, its witnesses and labels, and its
// correlation pattern. The density matrix itself is not stored.
struct DatasetRecord {
  std::uint64_t state_id = 0;
  int n_max = fock::kDefaultNMax;
  stellar::CoreState core;
  fock::GaussianCircuit circuit;
  witness::WitnessValues witness;
  witness::LabelVector labels;
  homodyne::CorrelationPattern pattern;
};

struct Dataset {
  std::vector<DatasetRecord> records;

  std::vector<homodyne::CorrelationPattern> patterns() const;
  std::vector<witness::LabelVector> labels() const;
  // Fraction of records labelled entangled, per criterion.
  std::array<double, 3> class_balance() const;
};

// Binary layout (little-endian): "CVDS1", u16 version, u64 record count,
// then fixed-size records; see docs/formats.md.
void write_dataset(const Dataset& dataset, std::ostream& os);
Dataset read_dataset(std::istream& is);
void write_dataset(const Dataset& dataset, const std::string& path);
Dataset read_dataset(const std::string& path);

struct GenerateConfig {
  std::size_t count = 15000;
  stellar::GenerationRanges ranges;
  int n_max = fock::kDefaultNMax;
  std::uint64_t seed = 1;
};

// Record i is produced from seed derive_seed(config.seed, i), so the result
// does not depend on the number of worker threads.
DatasetRecord make_record(std::uint64_t state_id, const GenerateConfig& config);
Dataset generate_dataset(const GenerateConfig& config);

}  // namespace cvkit::pipeline
