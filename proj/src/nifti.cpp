#include "dvseg/nifti.hpp"

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <vector>

namespace dvseg {

namespace {

#pragma pack(push, 1)
struct NiftiHeader {
  std::int32_t sizeof_hdr;
  char data_type[10];
  char db_name[18];
  std::int32_t extents;
  std::int16_t session_error;
  char regular;
  char dim_info;
  std::int16_t dim[8];
  float intent_p1;
  float intent_p2;
  float intent_p3;
  std::int16_t intent_code;
  std::int16_t datatype;
  std::int16_t bitpix;
  std::int16_t slice_start;
  float pixdim[8];
  float vox_offset;
  float scl_slope;
  float scl_inter;
  std::int16_t slice_end;
  char slice_code;
  char xyzt_units;
  float cal_max;
  float cal_min;
  float slice_duration;
  float toffset;
  std::int32_t glmax;
  std::int32_t glmin;
  char descrip[80];
  char aux_file[24];
  std::int16_t qform_code;
  std::int16_t sform_code;
  float quatern_b;
  float quatern_c;
  float quatern_d;
  float qoffset_x;
  float qoffset_y;
  float qoffset_z;
  float srow_x[4];
  float srow_y[4];
  float srow_z[4];
  char intent_name[16];
  char magic[4];
};
#pragma pack(pop)
static_assert(sizeof(NiftiHeader) == 348, "NIfTI-1 header must be 348 bytes");

constexpr std::int16_t kDtUint8 = 2;
constexpr std::int16_t kDtInt16 = 4;
constexpr std::int16_t kDtInt32 = 8;
constexpr std::int16_t kDtFloat32 = 16;
constexpr std::int16_t kDtFloat64 = 64;
constexpr std::int16_t kDtUint16 = 512;

// RAII over zlib's gzFile; reads plain and gzip files transparently.
class GzFile {
 public:
  GzFile(const std::filesystem::path& path, const char* mode)
      : file_(gzopen(path.string().c_str(), mode)) {
    if (file_ == nullptr) {
      throw IoError("cannot open " + path.string());
    }
  }
  ~GzFile() {
    if (file_ != nullptr) gzclose(file_);
  }
  GzFile(const GzFile&) = delete;
  GzFile& operator=(const GzFile&) = delete;

  void read_exact(void* dst, std::size_t bytes, const std::string& what) {
    const int got = gzread(file_, dst, static_cast<unsigned>(bytes));
    if (got < 0 || static_cast<std::size_t>(got) != bytes) {
      throw IoError("short read while reading " + what);
    }
  }

  void write_exact(const void* src, std::size_t bytes, const std::string& what) {
    const int put = gzwrite(file_, src, static_cast<unsigned>(bytes));
    if (put <= 0 || static_cast<std::size_t>(put) != bytes) {
      throw IoError("short write while writing " + what);
    }
  }

  void skip(std::size_t bytes) {
    std::vector<char> junk(bytes);
    read_exact(junk.data(), bytes, "header padding");
  }

 private:
  gzFile file_;
};

template <typename T>
void byteswap(T& value) {
  auto* p = reinterpret_cast<unsigned char*>(&value);
  for (std::size_t i = 0; i < sizeof(T) / 2; ++i) {
    std::swap(p[i], p[sizeof(T) - 1 - i]);
  }
}

void swap_header(NiftiHeader& h) {
  byteswap(h.sizeof_hdr);
  byteswap(h.extents);
  byteswap(h.session_error);
  for (auto& d : h.dim) byteswap(d);
  byteswap(h.intent_p1);
  byteswap(h.intent_p2);
  byteswap(h.intent_p3);
  byteswap(h.intent_code);
  byteswap(h.datatype);
  byteswap(h.bitpix);
  byteswap(h.slice_start);
  for (auto& p : h.pixdim) byteswap(p);
  byteswap(h.vox_offset);
  byteswap(h.scl_slope);
  byteswap(h.scl_inter);
  byteswap(h.slice_end);
  byteswap(h.cal_max);
  byteswap(h.cal_min);
  byteswap(h.slice_duration);
  byteswap(h.toffset);
  byteswap(h.glmax);
  byteswap(h.glmin);
  byteswap(h.qform_code);
  byteswap(h.sform_code);
  byteswap(h.quatern_b);
  byteswap(h.quatern_c);
  byteswap(h.quatern_d);
  byteswap(h.qoffset_x);
  byteswap(h.qoffset_y);
  byteswap(h.qoffset_z);
  for (auto& s : h.srow_x) byteswap(s);
  for (auto& s : h.srow_y) byteswap(s);
  for (auto& s : h.srow_z) byteswap(s);
}

struct RawImage {
  Eigen::Vector3i shape;
  Eigen::Vector3d spacing;
  Eigen::Matrix4d affine;
  Grid3<double> data;  // scaled values, pre-validation
};

template <typename T>
Grid3<double> read_typed(GzFile& f, const Eigen::Vector3i& shape, bool swap) {
  const Eigen::Index n =
      static_cast<Eigen::Index>(shape.x()) * shape.y() * shape.z();
  std::vector<T> raw(static_cast<std::size_t>(n));
  f.read_exact(raw.data(), raw.size() * sizeof(T), "voxel data");
  if (swap && sizeof(T) > 1) {
    for (auto& v : raw) byteswap(v);
  }
  Grid3<double> out(shape);
  for (Eigen::Index i = 0; i < n; ++i) {
    out[i] = static_cast<double>(raw[static_cast<std::size_t>(i)]);
  }
  return out;
}

Eigen::Matrix4d affine_from_qform(const NiftiHeader& h) {
  const double b = h.quatern_b, c = h.quatern_c, d = h.quatern_d;
  double a = 1.0 - (b * b + c * c + d * d);
  a = a < 1e-7 ? 0.0 : std::sqrt(a);
  const double qfac = h.pixdim[0] < 0.0f ? -1.0 : 1.0;
  Eigen::Matrix3d r;
  r << a * a + b * b - c * c - d * d, 2 * b * c - 2 * a * d,
      2 * b * d + 2 * a * c, 2 * b * c + 2 * a * d, a * a + c * c - b * b - d * d,
      2 * c * d - 2 * a * b, 2 * b * d - 2 * a * c, 2 * c * d + 2 * a * b,
      a * a + d * d - c * c - b * b;
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  for (int col = 0; col < 3; ++col) {
    const double scale = h.pixdim[col + 1] * (col == 2 ? qfac : 1.0);
    m.block<3, 1>(0, col) = r.col(col) * scale;
  }
  m(0, 3) = h.qoffset_x;
  m(1, 3) = h.qoffset_y;
  m(2, 3) = h.qoffset_z;
  return m;
}

RawImage load_raw(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw IoError("file does not exist: " + path.string());
  }
  GzFile f(path, "rb");
  NiftiHeader h{};
  f.read_exact(&h, sizeof(h), "NIfTI header");

  bool swap = false;
  if (h.sizeof_hdr != 348) {
    swap_header(h);
    swap = true;
    if (h.sizeof_hdr != 348) {
      throw FormatError("not a NIfTI-1 file: " + path.string());
    }
  }
  if (std::strncmp(h.magic, "n+1", 3) != 0) {
    if (std::strncmp(h.magic, "ni1", 3) == 0) {
      throw FormatError("two-file NIfTI (.hdr/.img) is not supported: " +
                        path.string());
    }
    throw FormatError("bad NIfTI magic in " + path.string());
  }

  const int ndim = h.dim[0];
  if (ndim < 3 || ndim > 7) {
    throw FormatError("expected a 3D image, got dim[0]=" +
                      std::to_string(ndim) + " in " + path.string());
  }
  for (int d = 4; d <= ndim; ++d) {
    if (h.dim[d] > 1) {
      throw FormatError("4D/multi-channel input is not supported: " +
                        path.string());
    }
  }

  RawImage img;
  img.shape = Eigen::Vector3i(h.dim[1], h.dim[2], h.dim[3]);
  if (img.shape.minCoeff() < 1) {
    throw FormatError("non-positive dimension in " + path.string());
  }
  img.spacing =
      Eigen::Vector3d(h.pixdim[1], h.pixdim[2], h.pixdim[3]).cwiseAbs();
  if (!(img.spacing.minCoeff() > 0.0)) {
    throw ValidationError("non-positive voxel spacing in " + path.string());
  }

  if (h.sform_code > 0) {
    img.affine = Eigen::Matrix4d::Identity();
    for (int c = 0; c < 4; ++c) {
      img.affine(0, c) = h.srow_x[c];
      img.affine(1, c) = h.srow_y[c];
      img.affine(2, c) = h.srow_z[c];
    }
  } else if (h.qform_code > 0) {
    img.affine = affine_from_qform(h);
  } else {
    img.affine = Eigen::Matrix4d::Identity();
    img.affine(0, 0) = img.spacing.x();
    img.affine(1, 1) = img.spacing.y();
    img.affine(2, 2) = img.spacing.z();
  }

  const long offset = static_cast<long>(h.vox_offset);
  if (offset < 348) {
    throw FormatError("bad vox_offset in " + path.string());
  }
  f.skip(static_cast<std::size_t>(offset) - sizeof(NiftiHeader));

  switch (h.datatype) {
    case kDtUint8:
      img.data = read_typed<std::uint8_t>(f, img.shape, swap);
      break;
    case kDtInt16:
      img.data = read_typed<std::int16_t>(f, img.shape, swap);
      break;
    case kDtInt32:
      img.data = read_typed<std::int32_t>(f, img.shape, swap);
      break;
    case kDtUint16:
      img.data = read_typed<std::uint16_t>(f, img.shape, swap);
      break;
    case kDtFloat32:
      img.data = read_typed<float>(f, img.shape, swap);
      break;
    case kDtFloat64:
      img.data = read_typed<double>(f, img.shape, swap);
      break;
    default:
      throw FormatError("unsupported NIfTI datatype " +
                        std::to_string(h.datatype) + " in " + path.string());
  }

  const double slope = h.scl_slope;
  const double inter = h.scl_inter;
  if (slope != 0.0 && !(slope == 1.0 && inter == 0.0)) {
    img.data.array() = img.data.array() * slope + inter;
  }
  return img;
}

std::string id_from_path(const std::filesystem::path& path) {
  std::string stem = path.filename().string();
  for (const char* ext : {".gz", ".nii"}) {
    if (stem.size() > std::strlen(ext) &&
        stem.compare(stem.size() - std::strlen(ext), std::strlen(ext), ext) ==
            0) {
      stem.resize(stem.size() - std::strlen(ext));
    }
  }
  return stem;
}

NiftiHeader make_header(const Eigen::Vector3i& shape,
                        const Eigen::Vector3d& spacing,
                        const Eigen::Matrix4d& affine, std::int16_t datatype,
                        std::int16_t bitpix) {
  NiftiHeader h{};
  h.sizeof_hdr = 348;
  h.regular = 'r';
  h.dim[0] = 3;
  h.dim[1] = static_cast<std::int16_t>(shape.x());
  h.dim[2] = static_cast<std::int16_t>(shape.y());
  h.dim[3] = static_cast<std::int16_t>(shape.z());
  for (int d = 4; d < 8; ++d) h.dim[d] = 1;
  h.datatype = datatype;
  h.bitpix = bitpix;
  h.pixdim[0] = 1.0f;
  h.pixdim[1] = static_cast<float>(spacing.x());
  h.pixdim[2] = static_cast<float>(spacing.y());
  h.pixdim[3] = static_cast<float>(spacing.z());
  h.vox_offset = 352.0f;
  h.scl_slope = 1.0f;
  h.scl_inter = 0.0f;
  h.xyzt_units = 2;  // NIFTI_UNITS_MM
  h.qform_code = 0;
  h.sform_code = 1;  // NIFTI_XFORM_SCANNER_ANAT
  for (int c = 0; c < 4; ++c) {
    h.srow_x[c] = static_cast<float>(affine(0, c));
    h.srow_y[c] = static_cast<float>(affine(1, c));
    h.srow_z[c] = static_cast<float>(affine(2, c));
  }
  std::strncpy(h.descrip, "dvseg", sizeof(h.descrip) - 1);
  std::memcpy(h.magic, "n+1", 4);
  return h;
}

bool wants_gzip(const std::filesystem::path& path) {
  return path.extension() == ".gz";
}

template <typename T>
void write_image(const std::filesystem::path& path, const NiftiHeader& h,
                 const std::vector<T>& voxels) {
  // "wT" writes the stream uncompressed, so one code path covers .nii too.
  GzFile f(path, wants_gzip(path) ? "wb" : "wbT");
  f.write_exact(&h, sizeof(h), "NIfTI header");
  const char pad[4] = {0, 0, 0, 0};  // no extensions
  f.write_exact(pad, 4, "extension flag");
  f.write_exact(voxels.data(), voxels.size() * sizeof(T), "voxel data");
}

}  // namespace

Volume load_volume(const std::filesystem::path& path) {
  RawImage raw = load_raw(path);
  const Eigen::Index bad = (!raw.data.array().isFinite()).count();
  if (bad > 0) {
    throw ValidationError("volume " + path.string() + " contains " +
                          std::to_string(bad) + " non-finite voxels");
  }
  Volume v;
  v.data = raw.data.cast<float>();
  v.spacing = raw.spacing;
  v.affine = raw.affine;
  v.id = id_from_path(path);
  return v;
}

LabelMask load_labels(const std::filesystem::path& path, int max_label) {
  RawImage raw = load_raw(path);
  LabelMask m;
  m.labels = Grid3<std::uint8_t>(raw.shape);
  Eigen::Index bad = 0;
  for (Eigen::Index i = 0; i < raw.data.size(); ++i) {
    const double v = raw.data[i];
    if (!std::isfinite(v) || v != std::floor(v) || v < 0.0 ||
        v > static_cast<double>(max_label)) {
      ++bad;
      continue;
    }
    m.labels[i] = static_cast<std::uint8_t>(v);
  }
  if (bad > 0) {
    throw ValidationError("label mask " + path.string() + " contains " +
                          std::to_string(bad) +
                          " voxels outside the label set [0, " +
                          std::to_string(max_label) + "]");
  }
  m.spacing = raw.spacing;
  m.affine = raw.affine;
  m.id = id_from_path(path);
  return m;
}

void save_volume(const Volume& v, const std::filesystem::path& path) {
  const NiftiHeader h =
      make_header(v.shape(), v.spacing, v.affine, kDtFloat32, 32);
  std::vector<float> voxels(static_cast<std::size_t>(v.data.size()));
  Eigen::Map<Eigen::ArrayXf>(voxels.data(), v.data.size()) = v.data.array();
  write_image(path, h, voxels);
}

void save_labels(const LabelMask& m, const std::filesystem::path& path) {
  const NiftiHeader h =
      make_header(m.shape(), m.spacing, m.affine, kDtUint8, 8);
  std::vector<std::uint8_t> voxels(static_cast<std::size_t>(m.labels.size()));
  for (Eigen::Index i = 0; i < m.labels.size(); ++i) {
    voxels[static_cast<std::size_t>(i)] = m.labels[i];
  }
  write_image(path, h, voxels);
}

}  // namespace dvseg
