from ebipla.data.gaussian import sample_gaussian_location
from ebipla.data.io import Dataset, export_csv, load_dataset, read_container, save_dataset, write_container
from ebipla.data.swiss_roll import SwissRollSpec, arc_length, inverse_arc_length, sample_swiss_roll, spiral
