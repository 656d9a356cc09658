#pragma once

#include "hdsi/baselines.hpp"
#include "hdsi/checkpoint.hpp"
#include "hdsi/error.hpp"
#include "hdsi/gradcheck.hpp"
#include "hdsi/metrics.hpp"
#include "hdsi/ntcn.hpp"
#include "hdsi/observations.hpp"
#include "hdsi/optimizer.hpp"
#include "hdsi/parallel.hpp"
#include "hdsi/preprocess.hpp"
#include "hdsi/rng.hpp"
#include "hdsi/split.hpp"
#include "hdsi/synth.hpp"
#include "hdsi/tensor.hpp"
#include "hdsi/tensor_ops.hpp"
#include "hdsi/trainer.hpp"
