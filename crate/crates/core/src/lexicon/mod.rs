//! Partisan lexicons: domains and search terms ranked by how strongly one
//! side uses them, speaker-level ideological loadings of phrases, search
//! trend filters, and the state-level validation of the final term lists.

mod chi_square;
mod loading;
pub mod synthetic;
mod trends;

pub use chi_square::{chi_square_partisanship, top_partisan_items, Side, TaggedCounts, TopItems};
pub use loading::{partisan_loading, rescale_t_values, Loading, Speaker, SpeakerCorpus};
pub use trends::{
    average_relative_frequency, expand_related, net_search_volume, pearson, select_search_terms,
    trend_filter, validate_correlation, NetVolume, PartisanTerm, RelatedQuery, Selection, TermLabel,
    TrendObservation, TrendSeries,
};
