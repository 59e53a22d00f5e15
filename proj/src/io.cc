#include "decay_lidar/io.h"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

namespace decay_lidar {

FormatError::FormatError(const std::string& what, std::uint64_t offset,
                         std::int64_t scan, std::int64_t record)
    : std::runtime_error([&] {
        std::ostringstream os;
        os << what << " at byte offset " << offset;
        if (record >= 0) os << " (scan " << scan << ", record " << record << ")";
        return os.str();
      }()),
      offset_(offset),
      scan_(scan),
      record_(record) {}

namespace {

constexpr char kScanMagic[] = "DSC1";
constexpr char kDecayMagic[] = "DRM1";
constexpr char kAccumulatorMagic[] = "DRA1";
constexpr char kReflectionMagic[] = "RFM1";
constexpr char kFieldMagic[] = "LFM1";

class ByteWriter {
 public:
  explicit ByteWriter(std::ostream& out) : out_(out) {}

  void Magic(const char* magic) {
    out_.write(magic, 4);
    U32(kFormatVersion);
  }
  void U8(std::uint8_t v) { out_.put(static_cast<char>(v)); }
  void U32(std::uint32_t v) { Le(v, 4); }
  void U64(std::uint64_t v) { Le(v, 8); }
  void F32(float v) { U32(std::bit_cast<std::uint32_t>(v)); }
  void F64(double v) { U64(std::bit_cast<std::uint64_t>(v)); }

  void Grid(const GridGeometry& g) {
    for (int a = 0; a < 3; ++a) F64(g.origin()[a]);
    F64(g.edge_length());
    for (auto n : g.dims()) U32(n);
  }

 private:
  void Le(std::uint64_t v, int bytes) {
    char buf[8];
    for (int i = 0; i < bytes; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out_.write(buf, bytes);
  }

  std::ostream& out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::istream& in) : in_(in) {}

  std::uint64_t offset() const { return offset_; }

  void Magic(const char* expected) {
    char magic[4];
    Raw(magic, 4, "missing magic");
    if (std::memcmp(magic, expected, 4) != 0) {
      throw FormatError(std::string("bad magic (expected ") + expected + ")", 0);
    }
    const std::uint64_t at = offset_;
    const std::uint32_t version = U32();
    if (version != kFormatVersion) {
      throw FormatError("unsupported format version " + std::to_string(version),
                        at);
    }
  }
  std::uint8_t U8() {
    char c;
    Raw(&c, 1, "truncated file");
    return static_cast<std::uint8_t>(c);
  }
  std::uint32_t U32() { return static_cast<std::uint32_t>(Le(4)); }
  std::uint64_t U64() { return Le(8); }
  float F32() { return std::bit_cast<float>(U32()); }
  double F64() { return std::bit_cast<double>(U64()); }

  GridGeometry Grid() {
    const std::uint64_t at = offset_;
    Vec3 origin;
    for (int a = 0; a < 3; ++a) origin[a] = F64();
    const double edge = F64();
    GridDims dims;
    for (auto& n : dims) n = U32();
    try {
      return GridGeometry(origin, edge, dims);
    } catch (const std::invalid_argument& e) {
      throw FormatError(std::string("invalid grid header: ") + e.what(), at);
    }
  }

  // Throws unless the stream is exhausted.
  void End() {
    if (in_.peek() != std::char_traits<char>::eof()) {
      throw FormatError("trailing bytes after payload", offset_);
    }
  }

  void set_context(std::int64_t scan, std::int64_t record) {
    scan_ = scan;
    record_ = record;
  }

 private:
  void Raw(char* buf, std::size_t n, const char* what) {
    in_.read(buf, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) {
      throw FormatError(what, offset_ + static_cast<std::uint64_t>(in_.gcount()),
                        scan_, record_);
    }
    offset_ += n;
  }
  std::uint64_t Le(int bytes) {
    unsigned char buf[8];
    Raw(reinterpret_cast<char*>(buf), static_cast<std::size_t>(bytes),
        "truncated file");
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
  }

  std::istream& in_;
  std::uint64_t offset_ = 0;
  std::int64_t scan_ = -1;
  std::int64_t record_ = -1;
};

std::ofstream OpenOut(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

std::ifstream OpenIn(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return in;
}

void CloseOut(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

std::size_t VoxelCount(const GridGeometry& g) {
  return static_cast<std::size_t>(g.voxel_count());
}

template <typename T>
std::vector<T> ReadArray(ByteReader& r, std::size_t n, T (ByteReader::*read)()) {
  std::vector<T> v(n);
  for (auto& x : v) x = (r.*read)();
  return v;
}

}  // namespace

// --- scans ------------------------------------------------------------------------

void WriteScans(std::ostream& out, const std::vector<Scan>& scans) {
  ByteWriter w(out);
  w.Magic(kScanMagic);
  w.U64(scans.size());
  for (const Scan& scan : scans) {
    w.F64(scan.r_min);
    w.F64(scan.r_max);
    w.U32(static_cast<std::uint32_t>(scan.rays.size()));
    for (int a = 0; a < 3; ++a) w.F64(scan.pose.translation[a]);
    w.F64(scan.pose.rotation.w());
    w.F64(scan.pose.rotation.x());
    w.F64(scan.pose.rotation.y());
    w.F64(scan.pose.rotation.z());
    for (const Ray& ray : scan.rays) {
      for (int a = 0; a < 3; ++a) w.F32(ray.direction[a]);
      w.U8(static_cast<std::uint8_t>(ray.kind));
      w.F32(ray.range);
    }
  }
}

std::vector<Scan> ReadScans(std::istream& in) {
  ByteReader r(in);
  r.Magic(kScanMagic);
  const std::uint64_t count = r.U64();
  std::vector<Scan> scans;
  for (std::uint64_t s = 0; s < count; ++s) {
    Scan scan;
    scan.r_min = r.F64();
    scan.r_max = r.F64();
    const std::uint32_t rays = r.U32();
    for (int a = 0; a < 3; ++a) scan.pose.translation[a] = r.F64();
    const double qw = r.F64(), qx = r.F64(), qy = r.F64(), qz = r.F64();
    scan.pose.rotation = Quat(qw, qx, qy, qz);
    scan.rays.resize(rays);
    for (std::uint32_t j = 0; j < rays; ++j) {
      r.set_context(static_cast<std::int64_t>(s), j);
      Ray& ray = scan.rays[j];
      for (int a = 0; a < 3; ++a) ray.direction[a] = r.F32();
      const std::uint64_t kind_at = r.offset();
      const std::uint8_t kind = r.U8();
      if (kind > 2) {
        throw FormatError("invalid kind byte " + std::to_string(kind), kind_at,
                          static_cast<std::int64_t>(s), j);
      }
      ray.kind = static_cast<ReadingKind>(kind);
      ray.range = r.F32();
    }
    r.set_context(-1, -1);
    scans.push_back(std::move(scan));
  }
  r.End();
  return scans;
}

void WriteScans(const std::filesystem::path& path,
                const std::vector<Scan>& scans) {
  std::ofstream out = OpenOut(path);
  WriteScans(out, scans);
  CloseOut(out, path);
}

std::vector<Scan> ReadScans(const std::filesystem::path& path) {
  std::ifstream in = OpenIn(path);
  return ReadScans(in);
}

// --- maps ---------------------------------------------------------------------------

void WriteDecayGrid(std::ostream& out, const DecayGrid& map) {
  ByteWriter w(out);
  w.Magic(kDecayMagic);
  w.Grid(map.geometry());
  w.F64(map.prior_rate());
  w.F64(map.unobserved_rate());
  for (double r : map.rates()) w.F32(static_cast<float>(r));
}

DecayGrid ReadDecayGrid(std::istream& in) {
  ByteReader r(in);
  r.Magic(kDecayMagic);
  const GridGeometry geom = r.Grid();
  const double prior = r.F64();
  const double unobserved = r.F64();
  const std::size_t n = VoxelCount(geom);
  std::vector<double> rates(n);
  for (auto& x : rates) x = r.F32();
  r.End();
  try {
    return DecayGrid(geom, std::move(rates), prior, unobserved);
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("invalid decay map: ") + e.what(), r.offset());
  }
}

void WriteAccumulator(std::ostream& out, const MapAccumulator& acc) {
  ByteWriter w(out);
  w.Magic(kAccumulatorMagic);
  w.Grid(acc.geometry());
  w.U64(acc.outside_hits());
  w.F64(acc.outside_dist());
  for (std::size_t i = 0; i < acc.hits().size(); ++i) {
    w.U64(acc.hits()[i]);
    w.F64(acc.dist()[i]);
  }
}

MapAccumulator ReadAccumulator(std::istream& in) {
  ByteReader r(in);
  r.Magic(kAccumulatorMagic);
  MapAccumulator acc(r.Grid());
  const std::uint64_t outside_hits = r.U64();
  const double outside_dist = r.F64();
  acc.set_outside(outside_hits, outside_dist);
  auto& hits = acc.mutable_hits();
  auto& dist = acc.mutable_dist();
  for (std::size_t i = 0; i < hits.size(); ++i) {
    hits[i] = r.U64();
    dist[i] = r.F64();
  }
  r.End();
  return acc;
}

void WriteReflectionGrid(std::ostream& out, const ReflectionGrid& map) {
  ByteWriter w(out);
  w.Magic(kReflectionMagic);
  w.Grid(map.geometry());
  w.F64(map.prior_q());
  w.F64(map.unobserved_q());
  for (double q : map.q()) w.F32(static_cast<float>(q));
  for (auto h : map.hits()) w.U64(h);
  for (auto m : map.misses()) w.U64(m);
}

ReflectionGrid ReadReflectionGrid(std::istream& in) {
  ByteReader r(in);
  r.Magic(kReflectionMagic);
  const GridGeometry geom = r.Grid();
  const double prior_q = r.F64();
  const double unobserved_q = r.F64();
  const std::size_t n = VoxelCount(geom);
  std::vector<double> q(n);
  for (auto& x : q) x = r.F32();
  auto hits = ReadArray<std::uint64_t>(r, n, &ByteReader::U64);
  auto misses = ReadArray<std::uint64_t>(r, n, &ByteReader::U64);
  r.End();
  try {
    return ReflectionGrid(geom, std::move(q), std::move(hits), std::move(misses),
                          prior_q, unobserved_q);
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("invalid reflection map: ") + e.what(),
                      r.offset());
  }
}

void WriteLikelihoodField(std::ostream& out, const LikelihoodField& field) {
  ByteWriter w(out);
  w.Magic(kFieldMagic);
  w.Grid(field.geometry());
  w.F64(field.sigma());
  w.F64(field.p_oor());
  for (double d : field.nearest_dist()) w.F32(static_cast<float>(d));
}

LikelihoodField ReadLikelihoodField(std::istream& in) {
  ByteReader r(in);
  r.Magic(kFieldMagic);
  const GridGeometry geom = r.Grid();
  LikelihoodFieldOptions options;
  options.sigma = r.F64();
  options.p_oor = r.F64();
  std::vector<double> dist(VoxelCount(geom));
  for (auto& x : dist) x = r.F32();
  r.End();
  try {
    return LikelihoodField(geom, std::move(dist), options);
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("invalid likelihood field: ") + e.what(),
                      r.offset());
  }
}

void WriteMap(const std::filesystem::path& path, const AnyMap& map) {
  std::ofstream out = OpenOut(path);
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, DecayGrid>) {
          WriteDecayGrid(out, m);
        } else if constexpr (std::is_same_v<T, ReflectionGrid>) {
          WriteReflectionGrid(out, m);
        } else {
          WriteLikelihoodField(out, m);
        }
      },
      map);
  CloseOut(out, path);
}

void WriteAccumulator(const std::filesystem::path& path,
                      const MapAccumulator& acc) {
  std::ofstream out = OpenOut(path);
  WriteAccumulator(out, acc);
  CloseOut(out, path);
}

MapAccumulator ReadAccumulator(const std::filesystem::path& path) {
  std::ifstream in = OpenIn(path);
  return ReadAccumulator(in);
}

std::string ReadMagic(const std::filesystem::path& path) {
  std::ifstream in = OpenIn(path);
  char magic[4] = {0, 0, 0, 0};
  in.read(magic, 4);
  if (in.gcount() != 4) throw FormatError("missing magic", 0);
  return std::string(magic, 4);
}

AnyMap ReadMap(const std::filesystem::path& path) {
  const std::string magic = ReadMagic(path);
  std::ifstream in = OpenIn(path);
  if (magic == kDecayMagic) return ReadDecayGrid(in);
  if (magic == kReflectionMagic) return ReadReflectionGrid(in);
  if (magic == kFieldMagic) return ReadLikelihoodField(in);
  throw FormatError("unknown map magic '" + magic + "'", 0);
}

std::shared_ptr<const SensorModel> MakeModel(AnyMap map) {
  return std::visit(
      [](auto&& m) -> std::shared_ptr<const SensorModel> {
        using T = std::decay_t<decltype(m)>;
        auto owned = std::make_shared<const T>(std::move(m));
        if constexpr (std::is_same_v<T, DecayGrid>) {
          return std::make_shared<DecayModel>(owned);
        } else if constexpr (std::is_same_v<T, ReflectionGrid>) {
          return std::make_shared<ReflectionModel>(owned);
        } else {
          return std::make_shared<EndpointModel>(owned);
        }
      },
      std::move(map));
}

// --- point clouds --------------------------------------------------------------------

CloudFormat ParseCloudFormat(const std::string& name) {
  if (name == "csv") return CloudFormat::kCsv;
  if (name == "ply" || name == "ply-ascii") return CloudFormat::kPlyAscii;
  throw std::invalid_argument("unknown point cloud format '" + name +
                              "' (expected csv or ply)");
}

std::vector<CloudPoint> ScanEndpoints(const std::vector<Scan>& scans) {
  std::vector<CloudPoint> points;
  for (const Scan& scan : scans) {
    for (std::size_t j = 0; j < scan.rays.size(); ++j) {
      if (scan.rays[j].kind != ReadingKind::kRange) continue;
      const Measurement m = scan.At(j);
      const Vec3 p = m.PointAt(m.range);
      points.push_back({p, p.z()});
    }
  }
  return points;
}

std::vector<CloudPoint> ProjectMap(const DecayGrid& map) {
  const GridGeometry& g = map.geometry();
  const auto& dims = g.dims();
  std::vector<CloudPoint> points;
  points.reserve(static_cast<std::size_t>(dims[0]) * dims[1]);
  for (std::int64_t iy = 0; iy < dims[1]; ++iy) {
    for (std::int64_t ix = 0; ix < dims[0]; ++ix) {
      double sum = 0.0;
      for (std::int64_t iz = 0; iz < dims[2]; ++iz) {
        sum += map.RateAt(g.Linearize({ix, iy, iz}));
      }
      Vec3 c = g.VoxelCenter(g.Linearize({ix, iy, 0}));
      c.z() = 0.0;
      points.push_back({c, sum});
    }
  }
  return points;
}

void WritePointCloud(const std::filesystem::path& path,
                     const std::vector<CloudPoint>& points, CloudFormat format,
                     const std::string& value_name) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << std::setprecision(9);
  if (format == CloudFormat::kCsv) {
    out << "x,y,z," << value_name << '\n';
    for (const CloudPoint& p : points) {
      out << p.position.x() << ',' << p.position.y() << ',' << p.position.z()
          << ',' << p.value << '\n';
    }
  } else {
    out << "ply\nformat ascii 1.0\nelement vertex " << points.size()
        << "\nproperty float x\nproperty float y\nproperty float z\n"
        << "property float " << value_name << "\nend_header\n";
    for (const CloudPoint& p : points) {
      out << p.position.x() << ' ' << p.position.y() << ' ' << p.position.z()
          << ' ' << p.value << '\n';
    }
  }
  out.flush();
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

void ExportPointCloud(const std::vector<Scan>& scans,
                      const std::filesystem::path& path, CloudFormat format) {
  WritePointCloud(path, ScanEndpoints(scans), format, "height");
}

void ExportMapProjection(const DecayGrid& map,
                         const std::filesystem::path& path, CloudFormat format) {
  WritePointCloud(path, ProjectMap(map), format, "rate_sum");
}

}  // namespace decay_lidar
