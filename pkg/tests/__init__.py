# Test package for ehrenfest-lab
