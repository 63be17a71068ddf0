#pragma once

#include "again/adversarial.hpp"
#include "again/config.hpp"
#include "again/dataset.hpp"
#include "again/diagnostics.hpp"
#include "again/diffnet/adam.hpp"
#include "again/diffnet/gradcheck.hpp"
#include "again/diffnet/ops.hpp"
#include "again/encoder.hpp"
#include "again/eval.hpp"
#include "again/graph.hpp"
#include "again/model.hpp"
#include "again/sampler.hpp"
#include "again/synthetic.hpp"
#include "again/trainer.hpp"
