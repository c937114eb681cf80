from opensys.helpers import DEBUG as DEBUG, VERSION as VERSION
