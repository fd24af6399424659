# Scenario module - configuration, problem registry, pipelines and export
