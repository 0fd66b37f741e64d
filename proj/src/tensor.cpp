#include "lstmgrid/tensor.hpp"

namespace lstmgrid {

QVector quantize_vector(std::span<const double> v, QFormat fmt) {
    QVector out(fmt, v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out.codes[i] = quantize(v[i], fmt).code;
    return out;
}

QMatrix quantize_matrix(const Matrix<double>& m, QFormat fmt) {
    QMatrix out(fmt, m.rows(), m.cols());
    for (std::size_t i = 0; i < m.data().size(); ++i) out.codes.data()[i] = quantize(m.data()[i], fmt).code;
    return out;
}

std::vector<double> dequantize_vector(const QVector& v) {
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = dequantize(v.at(i));
    return out;
}

Matrix<double> dequantize_matrix(const QMatrix& m) {
    Matrix<double> out(m.rows(), m.cols());
    for (std::size_t i = 0; i < out.data().size(); ++i) out.data()[i] = dequantize(Q8{m.codes.data()[i], m.format});
    return out;
}

}  // namespace lstmgrid
