#include "biastransfer/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <string>

#include "biastransfer/errors.hpp"

namespace bt {

namespace {

std::string lower_extension(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  return ext;
}

}  // namespace

bool is_image_file(const std::filesystem::path& path) {
  const auto ext = lower_extension(path);
  return ext == ".png" || ext == ".tif" || ext == ".tiff";
}

Image read_image(const std::filesystem::path& path) {
  cv::Mat mat = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (mat.empty()) throw IoError("cannot read image " + path.string());

  double scale;
  switch (mat.depth()) {
    case CV_8U: scale = 1.0 / 255.0; break;
    case CV_16U: scale = 1.0 / 65535.0; break;
    default: throw IoError("unsupported sample depth in " + path.string());
  }
  if (mat.channels() == 4) {
    cv::cvtColor(mat, mat, cv::COLOR_BGRA2BGR);
  } else if (mat.channels() == 2) {
    throw ChannelError("two-channel images are not supported: " + path.string());
  }
  const int channels = mat.channels();
  cv::Mat f;
  mat.convertTo(f, channels == 1 ? CV_32FC1 : CV_32FC3, scale);

  Image img(f.rows, f.cols, channels, Range::unit);
  for (int y = 0; y < f.rows; ++y) {
    const float* row = f.ptr<float>(y);
    for (int x = 0; x < f.cols; ++x) {
      if (channels == 1) {
        img.at(y, x, 0) = row[x];
      } else {
        // OpenCV stores BGR.
        img.at(y, x, 0) = row[3 * x + 2];
        img.at(y, x, 1) = row[3 * x + 1];
        img.at(y, x, 2) = row[3 * x + 0];
      }
    }
  }
  return img;
}

void write_image(const std::filesystem::path& path, const Image& img, BitDepth depth) {
  const auto ext = lower_extension(path);
  if (ext != ".png" && ext != ".tif" && ext != ".tiff") {
    throw IoError("unsupported output format " + path.string());
  }
  const Image unit = clip_to_range(convert_range(img, Range::unit));
  const double maxval = depth == BitDepth::sixteen ? 65535.0 : 255.0;
  const int type = depth == BitDepth::sixteen ? CV_16UC(unit.channels()) : CV_8UC(unit.channels());
  cv::Mat mat(unit.height(), unit.width(), type);
  for (int y = 0; y < unit.height(); ++y) {
    for (int x = 0; x < unit.width(); ++x) {
      for (int c = 0; c < unit.channels(); ++c) {
        const int dst_c = unit.channels() == 3 ? 2 - c : c;
        const double v = std::round(unit.at(y, x, c) * maxval);
        if (depth == BitDepth::sixteen) {
          mat.ptr<std::uint16_t>(y)[x * unit.channels() + dst_c] = static_cast<std::uint16_t>(v);
        } else {
          mat.ptr<std::uint8_t>(y)[x * unit.channels() + dst_c] = static_cast<std::uint8_t>(v);
        }
      }
    }
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), mat)) throw IoError("cannot write image " + path.string());
}

SegMask read_mask(const std::filesystem::path& path) {
  cv::Mat mat = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (mat.empty()) throw IoError("cannot read mask " + path.string());
  if (mat.channels() != 1) throw ChannelError("mask must be single channel: " + path.string());
  SegMask mask(mat.rows, mat.cols);
  for (int y = 0; y < mat.rows; ++y) {
    for (int x = 0; x < mat.cols; ++x) {
      mask.at(y, x) = mat.depth() == CV_16U ? mat.ptr<std::uint16_t>(y)[x]
                                             : mat.ptr<std::uint8_t>(y)[x];
    }
  }
  return mask;
}

void write_mask(const std::filesystem::path& path, const SegMask& mask) {
  cv::Mat mat(mask.height(), mask.width(), CV_16UC1);
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      const std::int32_t v = mask.at(y, x);
      if (v < 0 || v > 65535) throw IoError("mask label out of 16-bit range");
      mat.ptr<std::uint16_t>(y)[x] = static_cast<std::uint16_t>(v);
    }
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), mat)) throw IoError("cannot write mask " + path.string());
}

}  // namespace bt
