#pragma once

#include <random>
#include <string>
#include <utility>

#include "msap/parameters.hpp"

namespace msap {

/// Geometry of one 2D convolution. Parameters live in a ParameterSet as
/// weight [out, in, kh, kw] and bias [out].
struct Conv2dSpec {
    std::size_t in_channels = 1;
    std::size_t out_channels = 1;
    std::size_t kernel_h = 3;
    std::size_t kernel_w = 3;
    std::size_t stride = 1;
    std::size_t padding = 1;

    void validate() const;
    /// floor((extent + 2·pad − kernel)/stride) + 1, or 0 when no output fits.
    std::size_t out_extent(std::size_t extent, std::size_t kernel) const;
    std::size_t out_height(std::size_t h) const { return out_extent(h, kernel_h); }
    std::size_t out_width(std::size_t w) const { return out_extent(w, kernel_w); }
};

/// A convolution layer registered in a ParameterSet under `path`.
struct Conv2dLayer {
    Conv2dSpec spec;
    std::string path;
    ParamId weight = 0;
    ParamId bias = 0;

    static Conv2dLayer create(ParameterSet& params, std::string path, const Conv2dSpec& spec, std::mt19937_64& rng);
    Tensor operator()(const BoundParameters& bound, const Tensor& x) const;
};

/// Cross-correlation of x [C_in,H,W] with weight [C_out,C_in,kh,kw] plus
/// bias [C_out]. `path` names the layer in shape errors.
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, const Conv2dSpec& spec,
              const std::string& path = "conv2d");

/// Mean over non-overlapping factor×factor blocks; H and W must divide.
Tensor avg_pool2d(const Tensor& x, std::size_t factor = 2);

/// Bilinear upsampling with half-pixel centres: source coordinate
/// (dst + 0.5)/factor − 0.5, clamped to [0, extent−1].
Tensor upsample_bilinear(const Tensor& x, std::size_t factor = 2);

/// [C,H,W] -> [C], mean over spatial positions.
Tensor global_avg_pool(const Tensor& x);

/// Single LSTM layer. Gate blocks are stacked in the order (input, forget,
/// cell candidate, output) along the leading axis of the weights and bias.
struct LstmSpec {
    std::size_t input_dim = 1;
    std::size_t hidden_dim = 1;
};

struct LstmLayer {
    LstmSpec spec;
    std::string path;
    ParamId w_input = 0;   // [4·hidden, input]
    ParamId w_hidden = 0;  // [4·hidden, hidden]
    ParamId bias = 0;      // [4·hidden]

    static LstmLayer create(ParameterSet& params, std::string path, const LstmSpec& spec, std::mt19937_64& rng);
};

struct LstmOutput {
    Tensor h;
    Tensor c;
};

LstmOutput lstm_cell(const Tensor& x, const Tensor& h, const Tensor& c, const Tensor& w_input, const Tensor& w_hidden,
                     const Tensor& bias, const LstmSpec& spec);

/// weight·x + bias for x [n], weight [m,n], bias [m].
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

struct LinearLayer {
    std::string path;
    ParamId weight = 0;
    ParamId bias = 0;

    static LinearLayer create(ParameterSet& params, std::string path, std::size_t in, std::size_t out,
                              std::mt19937_64& rng);
    Tensor operator()(const BoundParameters& bound, const Tensor& x) const;
};

/// Inverted dropout: in training each entry is zeroed with probability p and
/// survivors scaled by 1/(1−p); identity otherwise. Only `rng` is consumed.
Tensor dropout(const Tensor& x, double p, bool training, std::mt19937_64& rng);

/// −log softmax(logits)[label] with max subtraction.
Tensor softmax_cross_entropy(const Tensor& logits, std::size_t label);

std::vector<double> softmax(std::span<const double> logits);

}  // namespace msap
