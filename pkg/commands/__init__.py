"""Pipeline stages exposed on the command line."""
