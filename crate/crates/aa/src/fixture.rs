//! Sample feed: two days of shouts from a four-person team, newest first.
//!
//! Used by tests, the acceptance suite and `aa-server seed`. Times are UTC.
//! The oldest row was cut off in the original listing; its time is a
//! placeholder chosen well before the next row.

use aa_core::{NickName, Timestamp};

#[derive(Debug, Clone)]
pub struct SampleRow {
    pub nick: &'static str,
    pub at: Timestamp,
    pub text: &'static str,
}

impl SampleRow {
    pub fn author(&self) -> NickName {
        NickName::parse(self.nick).expect("fixture nick")
    }
}

const fn at(day: u32, h: u32, m: u32) -> Timestamp {
    Timestamp::from_civil(2013, 5, day, h, m, 0)
}

const ROWS: [(&str, Timestamp, &str); 16] = [
    ("hybrid", at(28, 12, 6), "respondidos os interessados na pesquisa de redes e amigos, feita reuniao com -chu, encaminhada da infra para xerox e impressao e acompanhada defesa de desambiguacao do fernando nobre"),
    ("filter0", at(28, 3, 25), "aprendendo relatividade geral enquanto o python faz contas"),
    ("v1z", at(28, 1, 37), "tentando encontrar um balanço entre detalhe e velocidade no curso de Pattern Theory - nao quero ficar no cap 1 o curso todo"),
    ("hybrid", at(27, 18, 28), "achada a quinta e terceira edicao do livro do luger: http://ubuntuone.com/5gMOkYtchUDaR7Yqw2KTX"),
    ("aut0mata", at(27, 16, 21), "gabithume OPW Mozilla https://live.gnome.org/OutreachProgramForWomen/2013/JuneSeptember#Accepted_Participants"),
    ("hybrid", at(27, 16, 16), "gabithume inaugura participacao macambira no GPW Mozilla"),
    ("hybrid", at(27, 12, 29), "referencias interessantes por filter0 http://ubuntuone.com/7/Nb92IA2tXISAmjP23G3 de emergencia de padroes estruturais por sincronizacao e http://www3.nd.edu/~netsci/TALKS/Sayama_CT.pdf automatos geradores de redes GNA (generative net aut)"),
    ("v1z", at(27, 2, 49), "video da ultima versao em https://vimeo.com/pet-0-3-1"),
    ("v1z", at(27, 2, 48), "pet 0.3.1 solto"),
    ("v1z", at(27, 2, 18), "git commit in /Users/rfabbri/pet/pet: sprite do coma alcoolico"),
    ("v1z", at(27, 2, 8), "git commit in /Users/rfabbri/pet/pet: displaying hour"),
    ("v1z", at(27, 1, 42), "git commit in /Users/rfabbri/pet/pet: dois estagios de animacao de bebado, implementado com classes separadas"),
    ("v1z", at(27, 1, 6), "git commit in /Users/rfabbri/pet/pet: pingo vomitando sem borramento agora blz"),
    ("v1z", at(27, 0, 14), "investigando pq sprite ta borrada"),
    ("v1z", at(26, 23, 56), "git commit -am da bala de licor - vomitando q nem doido - volta ao normal"),
    ("v1z", at(26, 22, 0), "git commit -am eliminated stupid lists and using references directly now for the"),
];

/// Rows newest first, as a feed displays them.
pub fn sample_feed() -> Vec<SampleRow> {
    ROWS.iter().map(|(nick, at, text)| SampleRow { nick, at: *at, text }).collect()
}

/// Rows oldest first, the order in which they were originally sent.
pub fn sample_feed_chronological() -> Vec<SampleRow> {
    let mut rows = sample_feed();
    rows.reverse();
    rows
}

pub const SAMPLE_TEAM: [&str; 4] = ["hybrid", "filter0", "v1z", "aut0mata"];
