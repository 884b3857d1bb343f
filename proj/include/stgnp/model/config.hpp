#pragma once

#include <map>
#include <sstream>
#include <string>

#include "stgnp/core/errors.hpp"

namespace stgnp::model {

/// Architecture hyperparameters. latent_dim is the ODE state width per node;
/// hidden_dim is the combined latent+control width, so the control vector has
/// hidden_dim - latent_dim channels. spatial/temporal planes are the channel
/// counts of the latent edge weights.
struct ModelConfig {
    std::size_t latent_dim = 5;
    std::size_t hidden_dim = 17;
    std::size_t spatial_planes = 2;
    std::size_t temporal_planes = 5;
    std::size_t depth_node_encoders = 1;
    std::size_t depth_edge_encoders = 1;
    bool decode_just_latent = false;
    std::size_t n_rk4_substeps = 2;
    std::size_t global_dim = 0;  // raw external features (G)
    std::size_t rho_dim = 0;     // encoded externals; 0 when G == 0

    // Widths of the function approximators (not searched; fixed defaults).
    std::size_t node_encoder_width = 64;
    std::size_t edge_encoder_width = 16;
    std::size_t vf_width = 64;
    std::size_t update_width = 32;       // control update net
    std::size_t edge_update_width = 0;   // 0 = single linear layer
    std::size_t decoder_width = 64;
    std::size_t decoder_depth = 1;

    std::string vf_activation = "tanh";
    std::string mlp_activation = "relu";
    double sigma_floor = 1e-4;
    // Raw bias of the scale heads at init; softplus(-2.25) ~ 0.1 keeps early
    // reparameterization noise from drowning the latent signal.
    double scale_head_bias = -2.25;
    // Edge-weight posterior means start at 1/planes so the channel-summed
    // message weights begin near 1 (healthy message passing from step one).
    bool edge_mean_bias_one = false;
    // 0 = zero-init the vector-field output layer (constant trajectory at
    // init); > 0 scales a Glorot draw so dynamics are live from step one.
    double vf_final_scale = 0.0;

    std::size_t control_dim() const { return hidden_dim - latent_dim; }

    void validate() const {
        if (hidden_dim <= latent_dim)
            throw contract_error("ModelConfig: hidden_dim must exceed latent_dim");
        if (latent_dim == 0 || spatial_planes == 0 || temporal_planes == 0)
            throw contract_error("ModelConfig: latent_dim and plane counts must be >= 1");
        if (n_rk4_substeps == 0) throw contract_error("ModelConfig: n_rk4_substeps must be >= 1");
        if (global_dim > 0 && rho_dim == 0)
            throw contract_error("ModelConfig: rho_dim must be set when global_dim > 0");
    }

    std::map<std::string, std::string> to_map() const {
        std::map<std::string, std::string> m;
        auto put = [&m](const std::string& k, auto v) {
            std::ostringstream os;
            os.precision(17);
            os << v;
            m[k] = os.str();
        };
        put("latent_dim", latent_dim);
        put("hidden_dim", hidden_dim);
        put("spatial_planes", spatial_planes);
        put("temporal_planes", temporal_planes);
        put("depth_node_encoders", depth_node_encoders);
        put("depth_edge_encoders", depth_edge_encoders);
        put("decode_just_latent", decode_just_latent ? 1 : 0);
        put("n_rk4_substeps", n_rk4_substeps);
        put("global_dim", global_dim);
        put("rho_dim", rho_dim);
        put("node_encoder_width", node_encoder_width);
        put("edge_encoder_width", edge_encoder_width);
        put("vf_width", vf_width);
        put("update_width", update_width);
        put("edge_update_width", edge_update_width);
        put("decoder_width", decoder_width);
        put("decoder_depth", decoder_depth);
        m["vf_activation"] = vf_activation;
        m["mlp_activation"] = mlp_activation;
        put("sigma_floor", sigma_floor);
        put("scale_head_bias", scale_head_bias);
        put("edge_mean_bias_one", edge_mean_bias_one ? 1 : 0);
        put("vf_final_scale", vf_final_scale);
        return m;
    }

    static ModelConfig from_map(const std::map<std::string, std::string>& m) {
        ModelConfig c;
        auto get = [&m](const std::string& k, auto& out) {
            auto it = m.find(k);
            if (it == m.end()) return;
            std::istringstream is(it->second);
            is >> out;
        };
        get("latent_dim", c.latent_dim);
        get("hidden_dim", c.hidden_dim);
        get("spatial_planes", c.spatial_planes);
        get("temporal_planes", c.temporal_planes);
        get("depth_node_encoders", c.depth_node_encoders);
        get("depth_edge_encoders", c.depth_edge_encoders);
        int djl = 0;
        get("decode_just_latent", djl);
        c.decode_just_latent = djl != 0;
        get("n_rk4_substeps", c.n_rk4_substeps);
        get("global_dim", c.global_dim);
        get("rho_dim", c.rho_dim);
        get("node_encoder_width", c.node_encoder_width);
        get("edge_encoder_width", c.edge_encoder_width);
        get("vf_width", c.vf_width);
        get("update_width", c.update_width);
        get("edge_update_width", c.edge_update_width);
        get("decoder_width", c.decoder_width);
        get("decoder_depth", c.decoder_depth);
        auto gets = [&m](const std::string& k, std::string& out) {
            auto it = m.find(k);
            if (it != m.end()) out = it->second;
        };
        gets("vf_activation", c.vf_activation);
        gets("mlp_activation", c.mlp_activation);
        get("sigma_floor", c.sigma_floor);
        get("scale_head_bias", c.scale_head_bias);
        int embo = 0;
        get("edge_mean_bias_one", embo);
        c.edge_mean_bias_one = embo != 0;
        get("vf_final_scale", c.vf_final_scale);
        c.validate();
        return c;
    }
};

}  // namespace stgnp::model
