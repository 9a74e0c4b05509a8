#pragma once

// Raster files <-> IntensityImage / Mask through OpenCV.

#include <cmif/core.hpp>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <stdexcept>
#include <string>
#include <vector>

namespace cmif::tools {

class io_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// 8/16-bit grayscale becomes one channel, colour becomes three (R, G, B);
// alpha is dropped. Values keep their stored range.
inline IntensityImage read_image(const std::string& path) {
    const cv::Mat raw = cv::imread(path, cv::IMREAD_UNCHANGED | cv::IMREAD_ANYDEPTH | cv::IMREAD_ANYCOLOR);
    if (raw.empty()) throw io_error("cannot read image '" + path + "'");
    const int in_ch = raw.channels();
    if (in_ch != 1 && in_ch != 3 && in_ch != 4) {
        throw io_error("'" + path + "': unsupported channel count " + std::to_string(in_ch));
    }
    cv::Mat f;
    raw.convertTo(f, CV_MAKETYPE(CV_64F, in_ch));
    const int ch = in_ch == 1 ? 1 : 3;
    std::vector<double> data(static_cast<std::size_t>(f.rows) * static_cast<std::size_t>(f.cols) *
                             static_cast<std::size_t>(ch));
    std::size_t i = 0;
    for (int r = 0; r < f.rows; ++r) {
        const double* row = f.ptr<double>(r);
        for (int c = 0; c < f.cols; ++c) {
            const double* px = row + static_cast<std::ptrdiff_t>(c) * in_ch;
            if (ch == 1) {
                data[i++] = px[0];
            } else {
                // OpenCV stores B, G, R.
                data[i++] = px[2];
                data[i++] = px[1];
                data[i++] = px[0];
            }
        }
    }
    return IntensityImage({f.rows, f.cols}, ch, std::move(data));
}

// Nonzero pixels of the first channel are inside the mask.
inline Mask read_mask(const std::string& path) {
    const cv::Mat raw = cv::imread(path, cv::IMREAD_GRAYSCALE | cv::IMREAD_ANYDEPTH);
    if (raw.empty()) throw io_error("cannot read mask '" + path + "'");
    cv::Mat f;
    raw.convertTo(f, CV_64F);
    Mask m({f.rows, f.cols}, false);
    for (int r = 0; r < f.rows; ++r) {
        for (int c = 0; c < f.cols; ++c) m.set(r, c, f.at<double>(r, c) != 0.0);
    }
    return m;
}

inline void write_rgb(const std::string& path, const Grid<std::uint8_t>& red, const Grid<std::uint8_t>& green,
                      const Grid<std::uint8_t>& blue) {
    cv::Mat out(red.height(), red.width(), CV_8UC3);
    for (int r = 0; r < red.height(); ++r) {
        for (int c = 0; c < red.width(); ++c) out.at<cv::Vec3b>(r, c) = {blue(r, c), green(r, c), red(r, c)};
    }
    if (!cv::imwrite(path, out)) throw io_error("cannot write image '" + path + "'");
}

}  // namespace cmif::tools
