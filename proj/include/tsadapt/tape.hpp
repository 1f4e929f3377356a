#pragma once

#include <cstddef>
#include <vector>

#include "tsadapt/matrix.hpp"

namespace tsadapt::optim {

using num::Matrix;

/**
 * @brief Define-by-run reverse-mode autodiff over matrix expressions.
 *
 * Nodes are appended in topological order by construction; backward() walks the
 * list in reverse and accumulates adjoints. The primitive set is exactly what the
 * adapter architectures need; it is not a general framework. Every primitive has
 * a matching gradient rule that is finite-difference checked in the test suite.
 *
 * A tape is single-owner: build one forward expression, call backward() once,
 * read gradients, then discard.
 */
class Tape {
public:
    using NodeId = std::size_t;

    /// New input node. Gradients are accumulated for every node; callers read
    /// only the leaves they care about.
    NodeId leaf(Matrix value);

    NodeId matmul(NodeId a, NodeId b);
    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    /// Elementwise product.
    NodeId mul(NodeId a, NodeId b);
    NodeId scale(NodeId a, double c);
    NodeId add_scalar(NodeId a, double c);
    /// a (m x n) plus a (1 x n) row, broadcast to every row.
    NodeId add_row_broadcast(NodeId a, NodeId row);
    /// a (m x n) plus a (m x 1) column, broadcast to every column.
    NodeId add_col_broadcast(NodeId a, NodeId col);
    /// a (m x n) times a (1 x n) row, broadcast to every row.
    NodeId mul_row_broadcast(NodeId a, NodeId row);
    NodeId relu(NodeId a);
    NodeId exp(NodeId a);
    NodeId transpose(NodeId a);
    /// Clamp to [lo, hi]; gradient passes through strictly inside the interval.
    NodeId clamp(NodeId a, double lo, double hi);
    /// Sum of all entries, as a 1x1 node.
    NodeId sum(NodeId a);
    /// Reparameterized Gaussian draw: mu + exp(0.5 * log_var) .* noise.
    /// `noise` is a fixed input, never differentiated against.
    NodeId gaussian_sample(NodeId mu, NodeId log_var, Matrix noise);

    const Matrix& value(NodeId id) const;
    const Matrix& grad(NodeId id) const;

    /// Seeds the loss adjoint with 1 and accumulates adjoints for every node.
    /// The loss node must be 1x1.
    void backward(NodeId loss);

    std::size_t size() const { return nodes_.size(); }

private:
    enum class Op {
        leaf,
        matmul,
        add,
        sub,
        mul,
        scale,
        add_scalar,
        add_row_broadcast,
        add_col_broadcast,
        mul_row_broadcast,
        relu,
        exp,
        transpose,
        clamp,
        sum,
        gaussian_sample,
    };

    struct Node {
        Op op;
        NodeId a = 0;
        NodeId b = 0;
        double c0 = 0.0;
        double c1 = 0.0;
        Matrix aux;  // fixed noise for gaussian_sample
        Matrix value;
        Matrix grad;
    };

    NodeId push(Node n);
    void check_id(NodeId id) const;

    std::vector<Node> nodes_;
    bool ran_backward_ = false;
};

}  // namespace tsadapt::optim
