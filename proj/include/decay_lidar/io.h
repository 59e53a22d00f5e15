#ifndef DECAY_LIDAR_IO_H_
#define DECAY_LIDAR_IO_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "decay_lidar/baselines.h"
#include "decay_lidar/decay_map.h"
#include "decay_lidar/measurement.h"

// Binary formats are little-endian: 4-byte magic, u32 version, payload.
//
//   DSC1  u64 scan_count, then per scan: f64 r_min, f64 r_max,
//         u32 ray_count, 7 x f64 pose (tx ty tz qw qx qy qz), then
//         ray_count records of (3 x f32 direction, u8 kind, f32 range).
//   DRM1  grid header, f64 prior_rate, f64 unobserved_rate,
//         f32 rate[n].
//   DRA1  grid header, u64 outside_hits, f64 outside_dist,
//         n x (u64 hits, f64 dist).
//   RFM1  grid header, f64 prior_q, f64 unobserved_q, f32 q[n],
//         u64 hits[n], u64 misses[n].
//   LFM1  grid header, f64 sigma, f64 p_oor, f32 nearest_dist[n].
//
// Grid header: 3 x f64 origin, f64 edge_length, 3 x u32 dims. Voxel arrays
// are x-fastest.

namespace decay_lidar {

inline constexpr std::uint32_t kFormatVersion = 1;

// Malformed input. `offset` is the byte offset where parsing failed;
// `scan` / `record` locate the failing ray record in scan files (-1 if the
// failure is not inside a record).
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::uint64_t offset,
              std::int64_t scan = -1, std::int64_t record = -1);

  std::uint64_t offset() const { return offset_; }
  std::int64_t scan() const { return scan_; }
  std::int64_t record() const { return record_; }

 private:
  std::uint64_t offset_;
  std::int64_t scan_;
  std::int64_t record_;
};

// A file could not be opened, read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void WriteScans(std::ostream& out, const std::vector<Scan>& scans);
std::vector<Scan> ReadScans(std::istream& in);
void WriteScans(const std::filesystem::path& path,
                const std::vector<Scan>& scans);
std::vector<Scan> ReadScans(const std::filesystem::path& path);

void WriteDecayGrid(std::ostream& out, const DecayGrid& map);
DecayGrid ReadDecayGrid(std::istream& in);
void WriteAccumulator(std::ostream& out, const MapAccumulator& acc);
MapAccumulator ReadAccumulator(std::istream& in);
void WriteReflectionGrid(std::ostream& out, const ReflectionGrid& map);
ReflectionGrid ReadReflectionGrid(std::istream& in);
void WriteLikelihoodField(std::ostream& out, const LikelihoodField& field);
LikelihoodField ReadLikelihoodField(std::istream& in);

using AnyMap = std::variant<DecayGrid, ReflectionGrid, LikelihoodField>;

// File variants of the map writers.
void WriteMap(const std::filesystem::path& path, const AnyMap& map);
void WriteAccumulator(const std::filesystem::path& path,
                      const MapAccumulator& acc);
MapAccumulator ReadAccumulator(const std::filesystem::path& path);

// Dispatches on the file magic (DRM1, RFM1 or LFM1).
AnyMap ReadMap(const std::filesystem::path& path);

// Wraps a loaded map in the matching sensor model.
std::shared_ptr<const SensorModel> MakeModel(AnyMap map);

// First four bytes of a file.
std::string ReadMagic(const std::filesystem::path& path);

enum class CloudFormat { kCsv, kPlyAscii };

// Throws std::invalid_argument for anything but "csv" / "ply".
CloudFormat ParseCloudFormat(const std::string& name);

struct CloudPoint {
  Vec3 position;
  double value;  // height for scan endpoints, summed rate for projections
};

// World-frame endpoints of every RANGE ray; value = z.
std::vector<CloudPoint> ScanEndpoints(const std::vector<Scan>& scans);

// One point per (x, y) column at the column center (z = 0) with the sum of
// the column's decay rates.
std::vector<CloudPoint> ProjectMap(const DecayGrid& map);

// `value_name` labels the scalar column ("height", "rate_sum").
void WritePointCloud(const std::filesystem::path& path,
                     const std::vector<CloudPoint>& points, CloudFormat format,
                     const std::string& value_name);

void ExportPointCloud(const std::vector<Scan>& scans,
                      const std::filesystem::path& path, CloudFormat format);
void ExportMapProjection(const DecayGrid& map,
                         const std::filesystem::path& path, CloudFormat format);

}  // namespace decay_lidar

#endif  // DECAY_LIDAR_IO_H_
