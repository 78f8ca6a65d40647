// OT and KNN effects on the NSW file given as the first argument.
#include <iostream>

#include "otmatch/otmatch.hpp"

int main(int argc, char** argv) {
  using namespace otmatch;
  if (argc < 2) {
    std::cerr << "usage: sample_lalonde_estimates nsw_lalonde.txt\n";
    return 1;
  }
  try {
    const Dataset data = standardize(io::read_nsw(argv[1]), {"age", "education", "re75"}).dataset;
    OtConfig oc;
    oc.sinkhorn.epsilon = 1e-3;
    oc.sinkhorn.max_iterations = 100000;
    const auto arms = split_by_treatment(data, 2);
    const auto fit = fit_couplings(arms, oc);
    std::cout << "OT   ATE " << ate(arms, fit.couplings).point << "  ATT " << att(arms, fit.couplings).point << "\n";
    const auto knn = knn_estimates(data, 3);
    std::cout << "KNN3 ATE " << knn.ate << "  ATT " << knn.att << "\n";
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return e.exit_code();
  }
}
