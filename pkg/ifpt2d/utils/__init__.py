# Utils package for ifpt2d
