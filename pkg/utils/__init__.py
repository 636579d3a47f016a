# Utils package: error types, artifact schemas and report writers
