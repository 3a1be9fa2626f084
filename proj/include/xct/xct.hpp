#ifndef XCT_XCT_HPP
#define XCT_XCT_HPP

#include "xct/bhcn.hpp"
#include "xct/cnn.hpp"
#include "xct/core.hpp"
#include "xct/denoiser.hpp"
#include "xct/io.hpp"
#include "xct/metrics.hpp"
#include "xct/mlp.hpp"
#include "xct/optim.hpp"
#include "xct/phantom.hpp"
#include "xct/physics.hpp"
#include "xct/projector.hpp"
#include "xct/recon.hpp"
#include "xct/rng.hpp"
#include "xct/segment.hpp"

#endif
